"""Solve the exported LP fixtures with HiGHS and record their objective values.

Run once after regenerating the .lp files:  python3 solve_fixtures.py
"""
import json
import pathlib

import highspy

here = pathlib.Path(__file__).parent
objectives = {}
for lp in sorted(here.glob("*.lp")):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(lp))
    h.run()
    assert h.modelStatusToString(h.getModelStatus()) == "Optimal", lp
    objectives[lp.stem] = h.getInfo().objective_function_value
(here / "objectives.json").write_text(json.dumps(objectives, indent=2, sort_keys=True) + "\n")
print(objectives)
