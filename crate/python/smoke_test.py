"""Smoke test for the rlfd extension module.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml
"""

import math
import os
import sys
import tempfile

import rlfd


def check(cond, msg):
    if not cond:
        print(f"FAIL {msg}")
        sys.exit(1)
    print(f"ok   {msg}")


def main():
    env = rlfd.VesselEnv()
    s = env.reset(1)
    check(s == [0.0, 0.0, 0.0, 9.0, 5.0, math.radians(270.0)], "case 1 initial state")
    s2, r, done, reason = env.step(1.0, 0.0)
    check(abs(s2[0] - 1.0 / 19.0) < 1e-12 and not done and reason == "running", "one surge step")
    check(env.step_index == 1 and not env.in_berth_zone(), "env bookkeeping")

    try:
        env.step(2.0, 0.0)
        check(False, "out-of-range action rejected")
    except ValueError:
        check(True, "out-of-range action rejected")

    check(rlfd.gaussian_kl([0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [1.0, 1.0]) == 0.5, "gaussian kl")

    text = rlfd.default_config()
    check("algorithm=sgac" in text, "default config text")

    agent = rlfd.Agent("algorithm=sgac\ncase=3\nseed=1\n")
    log = agent.run_episode()
    check(log["steps"] > 0 and math.isfinite(log["return"]), "sgac episode")
    check(agent.lambda_ is not None and agent.lambda_ >= 1.0, "dual variable")
    a = agent.act(s)
    check(all(-1.0 <= x <= 1.0 for x in a), "deterministic action in range")
    ae = agent.expert_action(s)
    check(all(-1.0 <= x <= 1.0 for x in ae), "expert action in range")
    ev = agent.evaluate(3)
    check(ev["steps"] > 0 and "trajectory_csv" in ev, "agent evaluation")

    with tempfile.TemporaryDirectory() as root:
        out = rlfd.train("algorithm=td3\nepisodes=2\neval_every=1\noutput_dir=a\n", root)
        check(out["episodes"] == 2 and os.path.isdir(out["run_dir"]), "train run")
        cp = os.path.join(out["run_dir"], "checkpoint.txt")
        ev = rlfd.evaluate(cp, 2)
        check(ev["case"] == 2 and ev["steps"] > 0, "checkpoint evaluation")
        rlfd.train("algorithm=ddpg\nepisodes=1\noutput_dir=b\n", root)
        table = rlfd.compare([os.path.join(root, "a"), os.path.join(root, "b")])
        check(table.splitlines()[0].startswith("metric,td3"), "compare table")
        agent.save(os.path.join(root, "agent.txt"))
        check(os.path.getsize(os.path.join(root, "agent.txt")) > 0, "agent checkpoint")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
