"""Smoke test for the dalc_py extension.

Build and install first:

    cd crates/py && maturin build --release -o dist && pip install dist/*.whl
"""

import json
import math
import sys
import tempfile

import dalc_py


def check(name, cond, detail=""):
    print(("ok  " if cond else "FAIL"), name, detail)
    return cond


def main():
    results = []

    g = dalc_py.Graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    results.append(check("graph spanning tree", g.has_spanning_tree_from_leader()))
    lap = g.laplacian()
    results.append(check("laplacian rows", all(abs(sum(r)) < 1e-15 for r in lap)))
    broken = dalc_py.Graph(3, [(0, 1, 1.0)]).unreachable_followers()
    results.append(check("unreachable follower", broken == [2], str(broken)))

    robot = dalc_py.Manipulator.bundled()[0]
    m = robot.mass_matrix([0.3, -1.1])
    results.append(check("M22", abs(m[1][1] - 0.04084125) < 1e-12, str(m[1][1])))
    q, qd, acc = [0.2, -0.4], [0.5, 1.0], [1.0, -2.0]
    tau = robot.inverse_dynamics(q, qd, acc)
    back = robot.forward_dynamics(q, qd, tau)
    results.append(check("dynamics round trip", max(abs(a - b) for a, b in zip(back, acc)) < 1e-9))

    lat = dalc_py.Lattice(4, 4, [[-1.2, 1.2]] * 4, 0.8)
    s = lat.regressor(lat.center(5))
    results.append(check("regressor peak", lat.node_count == 256 and s[5] == 1.0))

    x = dalc_py.closed_form_default_leader(math.pi / 2)
    results.append(check("leader closed form", abs(x[0] - 0.8) < 1e-15))

    try:
        dalc_py.Experiment.from_toml(dalc_py.default_scenario().replace("gain = 10.0", "gain = -1.0"))
        results.append(check("gain validation", False))
    except ValueError as e:
        results.append(check("gain validation", "gain positivity" in str(e)))

    exp = dalc_py.Experiment.bundled()
    exp.duration = 2.0
    exp.average_window = (1.0, 2.0)
    run = exp.run()
    a1 = run.agent(1)
    results.append(check("run length", len(run.times) == 201 and len(a1["e1"]) == 201))
    weights = run.weights_json()
    results.append(check("weights artifact", json.loads(weights)["schema_version"] == 1))
    replay = exp.replay(weights)
    results.append(check("replay", len(replay.times) == 201))
    summary = json.loads(run.summary_json())
    results.append(check("summary", len(summary["agents"]) == 5))
    with tempfile.TemporaryDirectory() as d:
        files = run.write_csv(d)
        results.append(check("csv files", len(files) == 6))

    for name, passed, detail in dalc_py.verify():
        results.append(check("verify " + name, passed, detail))

    failed = results.count(False)
    print(f"{len(results) - failed}/{len(results)} passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
