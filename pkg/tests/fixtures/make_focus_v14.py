"""Regenerate focus_v14.json: the degree-14 time-independent V for the unstable focus."""
import json
from pathlib import Path

from extremebound.bounds import compute_bound
from extremebound.system import builtin_problem


def main():
    spec = builtin_problem("unstableFocus2d", {})
    res = compute_bound(spec, 14, time_independent=True)
    V = res.V.with_variables(spec.states)
    out = {"problem": "unstableFocus2d", "degree": 14, "lambda": res.lam,
           "status": res.status.value, "variables": list(spec.states), "V": V.to_string()}
    path = Path(__file__).with_name("focus_v14.json")
    path.write_text(json.dumps(out, indent=1) + "\n", encoding="utf-8")
    print(f"lambda = {res.lam:.9g} ({res.status.value}) -> {path}")


if __name__ == "__main__":
    main()
