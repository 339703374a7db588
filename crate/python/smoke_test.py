"""Smoke test for the regretforge_py extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/regretforge_py-*.whl
"""

import json
import os
import tempfile

import regretforge_py as rf


def main():
    game = rf.Game.biased_shapley(0.25)
    assert (game.players, game.num_infostates, game.num_terminals) == (2, 2, 9), game

    leduc = rf.Game.leduc(2, 1.0)
    assert leduc.num_terminals == 1116, leduc

    rows = rf.solve(game, "pcfr+", 1024)
    assert [r["step"] for r in rows] == [2**k for k in range(11)]
    assert rows[-1]["nash_gap"] < 1e-3, rows[-1]

    oracle = rf.oracle([0.0, 0.25, 0.5])
    assert all(r["nash_gap"] <= 1e-9 for r in oracle), oracle
    assert abs(oracle[-1]["cce_gap"]) <= 1e-12

    predictor, losses = rf.train(
        json.dumps({"family": "biased_shapley", "low": 0, "high": 0.5}),
        json.dumps({"epochs": 3, "horizon": 4, "batch": 2, "hidden": 4, "embed": 2}),
    )
    assert len(losses) == 3 and all(l >= 0 for l in losses)

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "p.rfck")
        predictor.save(path)
        again = rf.Predictor.load(path)
        assert again.num_parameters == predictor.num_parameters
        assert rf.solve(game, "npcfr", 64, again) == rf.solve(game, "npcfr", 64, predictor)

    result = rf.evaluate(
        json.dumps(
            {
                "distribution": {"family": "biased_shapley", "low": 0, "high": 0.5},
                "algorithms": ["cfr", "npcfr"],
                "samples": 2,
                "log2_steps": 5,
            }
        ),
        predictor,
    )
    assert len(result["rows"]) == 2 * 2 * 6
    fractions = result["tables"]["threshold"]["rows"][0]["fractions"]
    assert all(0.0 <= f <= 1.0 for f in fractions)

    try:
        rf.evaluate('{"distribution": {"family": "biased_shapley", "low": 0, "high": 0.5}, "sample": 1}')
    except ValueError as e:
        assert "sample" in str(e)
    else:
        raise AssertionError("unknown field accepted")

    try:
        rf.Predictor.load("/nonexistent/p.rfck")
    except OSError:
        pass
    else:
        raise AssertionError("missing checkpoint loaded")

    assert all(c["passed"] for c in rf.gradcheck())
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
