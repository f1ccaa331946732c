"""Why composite pulses are not enough on a transmon.

BB1 cancels amplitude errors exactly on a two-level system.  Played as
square segments on a three-level transmon, its sharp edges and phase jumps
excite the second excited state, and the leakage error dominates.

    python demos/bb1_and_leakage.py
"""

# %%
import numpy as np

from robustpulse import TransmonModel
from robustpulse.baselines import (analytic_qubit_fidelity, bb1_min_duration, constant_x90,
                                   make_bb1)
from robustpulse.qmodel import propagate_unitary
from robustpulse.scp import evaluate_worst_case

qubit = TransmonModel(num_levels=2)
transmon = TransmonModel()

t_min = bb1_min_duration(transmon, 90)
print(f"BB1 X90 needs {t_min * 1e9:.0f} ns at full drive")

# %% closed form for a square pulse on two levels
eta = 0.05
square = constant_x90(qubit, t_min, 10)
sim = evaluate_worst_case(qubit, None, square, eta).fidelities[-1]
print(f"square pulse, eta={eta}: gate fidelity {analytic_qubit_fidelity(t_min, eta):.8f} "
      f"(closed form), average fidelity {sim:.8f}")

# %% BB1 on two and on three levels
for name, model in (("two-level", qubit), ("transmon", transmon)):
    seq = make_bb1(model)
    curve = evaluate_worst_case(model, None, seq.signal, eta)
    print(f"BB1 {name:9s}: worst 1-F on |eta|<=0.05 = {curve.worst_infidelity:.2e}")

# %% the transmon penalty is leakage; a gentler drive helps, though not monotonically
for t in (150e-9, 200e-9, 300e-9):
    seq = make_bb1(transmon, 90, t)
    leak = propagate_unitary(transmon, seq.signal).max_leakage
    inf = evaluate_worst_case(transmon, None, seq.signal, eta).worst_infidelity
    print(f"  {t * 1e9:.0f} ns: amplitude {seq.amplitude:.2f}, peak leakage {leak:.1e}, "
          f"worst 1-F {inf:.2e}")
print("segment phases (deg):", np.round(make_bb1(transmon).segment_phases_deg, 2))
