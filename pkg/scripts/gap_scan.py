"""Low spectrum of the assembled chain for both toy computations over a range of N."""
import argparse
from fractions import Fraction

from specgap.assembly import AssemblyConfig, total_spectrum_model

p = argparse.ArgumentParser()
p.add_argument("--n-min", type=int, default=3)
p.add_argument("--n-max", type=int, default=8)
args = p.parse_args()

print("N,halting,lambda0,lambda1,count_below_half")
for N in range(args.n_min, args.n_max + 1):
    for halting in (False, True):
        r = total_spectrum_model(AssemblyConfig(halting=halting, mu=Fraction(1)), N)
        print(f"{N},{int(halting)},{r['lambda0']:.6f},{r['lambda1']:.6f},{r['count_below_half']}")
