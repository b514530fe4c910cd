"""Exercises the compiled module end to end. Run after `maturin develop`."""

from fractions import Fraction

import worksim


def main():
    rules = worksim.rules()
    assert {r["rule_id"] for r in rules} >= {"website_monitoring", "ads_campaign_planning"}
    hard = worksim.rules(difficulty="hard")
    assert hard and all(r["difficulty"] == "hard" for r in hard)

    bench = worksim.build_benchmark(6, 42)
    again = worksim.build_benchmark(6, 42)
    assert bench.to_json() == again.to_json()
    assert len(bench) == 6
    assert worksim.Benchmark.from_json(bench.to_json()).scenario_ids == bench.scenario_ids

    sid = bench.scenario_ids[0]
    view = bench.agent_view(sid)
    assert "hidden" not in view and view["scenario_id"] == sid

    session, first = bench.session(sid, agent="smoke")
    assert first["tasks"], "initial observation lists tasks"
    obs = session.act("ListContacts")
    assert obs["result"]["status"] == "ok"
    session.step("two calls", [{"name": "CheckCalendar"}, {"name": "ListFiles"}])
    report = session.finalize()
    assert report == session.finalize()
    assert not session.is_open
    try:
        session.act("ListContacts")
    except worksim.WorksimError:
        pass
    else:
        raise AssertionError("act after finalize must fail")
    kinds = [e["kind"] for e in session.events()]
    assert kinds[-1] == "finalized" and kinds.count("step") == 2

    oracle = bench.run({"kind": "oracle"}, parallelism=2)
    assert oracle["overall"]["checkpoint_score"] == "1/1", oracle["overall"]
    random = bench.run({"kind": "random", "seed": 1})
    assert Fraction(random["overall"]["checkpoint_score"]) < 1

    assert worksim.score([(2, 4), (3, 3)]) == (3, 4)
    try:
        worksim.score([])
    except worksim.WorksimError:
        pass
    else:
        raise AssertionError("empty score must fail")
    agg = worksim.aggregate("b", "a", [report])
    assert agg["episodes"][0]["scenario_id"] == sid
    print("smoke test ok:", len(rules), "rules,", len(bench), "scenarios")


if __name__ == "__main__":
    main()
