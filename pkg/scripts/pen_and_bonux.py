"""Segment energy profile of the halting toy next to the never-halting one."""
import argparse
from fractions import Fraction

from specgap import history_state, qpe_sim, tm_model

p = argparse.ArgumentParser()
p.add_argument("--k", type=int, default=6, help="cells consumed before halting")
p.add_argument("--w-max", type=int, default=16)
args = p.parse_args()

halting = history_state.SegmentModel(tm_model.consume_k(args.k), enc=qpe_sim.encode_phase("1"))
never = history_state.SegmentModel(tm_model.never_halt(), mu=Fraction(1, 4))
print(f"# w_halt = {history_state.w_halt(halting)}")
print("w,halting,never_halting")
for w in range(2, args.w_max + 1):
    a = history_state.segment_energy(halting, w).lambda_min
    b = history_state.segment_energy(never, w).lambda_min
    print(f"{w},{a:.6e},{b:.6e}")
