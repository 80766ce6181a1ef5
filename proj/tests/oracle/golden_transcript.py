# Writes tests/data/golden_transcript.jsonl. Both sides are computed here:
# the server is a constant-velocity predictor, s_t = s_0 - t dt v_0.
#   python3 tests/oracle/golden_transcript.py > tests/data/golden_transcript.jsonl
import json


def dump(obj):
    # nlohmann writes integral doubles with a trailing ".0"
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


dt = 0.2
rs, rv = [15.0], [5.0]
for _ in range(3):
    rs.append(rs[-1] - dt * rv[-1])
    rv.append(min(10.0, rv[-1] + dt * 5.0))
plan = [x for pair in zip(rs, rv) for x in pair]
scenario = {
    "collision_threshold": 2.0,
    "geometry": 1.5707963267948966,
    "horizon": 3,
    "human0": [15.0, 8.0],
    "robot0": [15.0, 5.0],
    "params": {"T": 2.0, "a": 1.0, "b": 1.5, "delta": 4.0, "dt": 0.2, "far_target": -10000.0, "s0": 4.0,
               "sigma": 4.0, "v0": 10.0},
}
seed = {"role": "human-noise", "root": 42, "scenario_id": 7, "trial": 0}
h0 = scenario["human0"]
cv = [x for t in range(4) for x in (h0[0] - t * dt * h0[1], h0[1])]

session = [
    ({"id": 0, "kind": "hello", "version": "1.0", "client": "ibp-audit"},
     {"id": 0, "kind": "hello_ack", "version": "1.0", "name": "fixture-constant-velocity", "max_k": 4096,
      "capacity": 1}),
    ({"id": 1, "kind": "predict", "k": 2, "robot_future": plan, "scenario": scenario, "seed": seed},
     {"id": 1, "kind": "samples", "trajectories": [cv, cv]}),
    ({"id": 2, "kind": "predict", "k": 0, "robot_future": plan, "scenario": scenario, "seed": seed},
     {"id": 2, "kind": "error", "message": "invalid-argument: query k must be >= 1"}),
    ({"id": 3, "kind": "shutdown"}, None),
]
for request, reply in session:
    print("> " + dump(request))
    if reply is not None:
        print("< " + dump(reply))
