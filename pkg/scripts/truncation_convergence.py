"""Gate error of the tuned sqrt(X) and cosine CZ versus transmon dimension and excitation cap."""

import argparse
import json

from qsim.device import default_two_qubit_model
from qsim.gates import calibrate_working_freq, cz_run, sqrt_x_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ramp", type=float, default=10.5746, help="sqrt(X) ramp time in ns")
    ap.add_argument("--cz", action="store_true", help="also run the 30 ns cosine CZ (slow)")
    ap.add_argument("--dt", type=float, default=0.05)
    args = ap.parse_args()

    model = default_two_qubit_model()
    rows = []
    for dim, cap in ((5, 5), (6, 5), (5, 6), (6, 6)):
        row = {"dim": dim, "cap": cap}
        for q in ("q0", "q1"):
            wf = calibrate_working_freq(model, q, dim=dim, cap=cap)
            run = sqrt_x_run(model, q, args.ramp, work_freq=wf, dt=args.dt, dim=dim, cap=cap)
            row[f"sqrt_x_{q}_error"] = 1 - run.fidelity.fidelity
        if args.cz:
            run = cz_run(model, "cosine", 5.754993, 7.044634, dt=args.dt, dim=dim, cap=cap, length=30.0, ramp=10.0)
            row["cz_cosine_error"] = 1 - run.fidelity.fidelity
        rows.append(row)
        print(json.dumps(row))
    ref = rows[0]
    worst = max(abs(r[k] - ref[k]) for r in rows[1:] for k in r if k.endswith("_error"))
    print(f"largest gate-error change relative to dim=5, cap=5: {worst:.2e}")


if __name__ == "__main__":
    main()
