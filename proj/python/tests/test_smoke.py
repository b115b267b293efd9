import math

import pytest

import layoutprior as lp


def test_schedule_endpoints():
    assert lp.sigma(0.0) == pytest.approx(0.01)
    assert lp.sigma(1.0) == pytest.approx(50.0)
    assert lp.sigma(0.5) == pytest.approx(0.01 * math.sqrt(5000.0))
    with pytest.raises(lp.NumericalError):
        lp.sigma(1.5)


def test_vocab_and_generation():
    names = [c["name"] for c in lp.vocab("dinner")]
    assert names[:2] == ["plate", "fork"]
    examples = lp.generate("dinner-left", count=5, seed=7)
    assert len(examples) == 5
    assert examples == lp.generate("dinner-left", count=5, seed=7)
    plate = names.index("plate")
    fork = names.index("fork")
    for ex in examples:
        assert ex["domain"] == "dinner-left"
        pos = {o["label"]: o["pos"] for o in ex["objects"]}
        # Left-handed setting: the fork lies to the right of the plate.
        assert pos[fork][0] > pos[plate][0]
    with pytest.raises(lp.UsageError):
        lp.generate("kitchen-left", count=1, seed=0)


def test_metrics():
    assert lp.coverage_score([[(1, 0)], [(0, 2)]], [[(0, 0)]]) == pytest.approx(1.0)
    assert lp.coverage_score([[(0, 0)]], [[(0, 0)], [(1, 1)]]) == pytest.approx(2.0)
    expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
    assert lp.kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-12)
    assert lp.kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0


def test_plan_and_simulate():
    names = [c["name"] for c in lp.vocab("dinner")]
    objects = [(0.2, 0.2, names.index("cup")), (0.1, 0.3, names.index("fork"))]
    initial = [(-0.5, 0.0), (0.3, 0.0)]
    goal = [(0.3, 0.0), (-0.5, 0.2)]
    actions = lp.plan(initial, goal, objects)
    assert [a["kind"] for a in actions] == ["move-away", "pick-place", "pick-place"]
    report = lp.simulate(actions, initial, objects)
    assert report["collision_free"]
    assert report["final"] == goal
    bad = lp.simulate(actions[1:], initial, objects)
    assert not bad["collision_free"]
    assert bad["colliding_pair"] == (0, 1)
    with pytest.raises(lp.DataError):
        lp.plan(initial, [(0.0, 0.0), (0.05, 0.0)], objects)


def test_cli_in_process(tmp_path):
    out = tmp_path / "d.jsonl"
    code, stdout, stderr = lp.run_cli(
        ["gen-data", "--domain", "desk-vanilla", "--count", "3", "--seed", "1", "--out", str(out)]
    )
    assert code == 0, stderr
    assert "wrote 3 examples" in stdout
    assert len(out.read_text().splitlines()) == 4
    code, _, stderr = lp.run_cli(["gen-data", "--count", "3"])
    assert code == 2
    assert stderr.startswith("error code=2 kind=usage: ")
