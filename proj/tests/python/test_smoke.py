import math
from pathlib import Path

import numpy as np
import pytest

import neuralabs as na

MODELS = Path(__file__).resolve().parents[2] / "models"


def model(name):
    return na.load_model(str(MODELS / f"{name}.model"))


def test_load_and_eval():
    jet = model("jet")
    assert jet.dim == 2
    assert jet.init == [(0.45, 0.5), (-0.6, -0.55)]
    # -y - 1.5 x^2 - 0.5 x^3 - 0.1 at the origin
    assert jet.eval(np.zeros(2))[0] == pytest.approx(-0.1)
    # 3x - y at (1, 2)
    assert jet.eval(np.array([1.0, 2.0]))[1] == pytest.approx(1.0)


def test_parse_errors():
    with pytest.raises(na.SyntaxError):
        na.parse_model('flow = [')
    assert issubclass(na.SyntaxError, na.Error)


def test_synthesize_and_translate():
    water = model("water")
    out = na.synthesize(water, [12], eps=0.15, seed=1)
    assert out["report"]["success"]
    a = out["abstraction"]
    assert a.eps <= 0.15
    x = np.array([1.2])
    assert abs(a.forward(x)[0] - water.eval(x)[0]) <= a.e[0]
    again = na.Abstraction.from_json(a.to_json())
    assert again.forward(x)[0] == a.forward(x)[0]

    h = na.build_automaton(a, water)
    assert h.num_modes >= 1
    for k in range(h.num_modes):
        A, b = h.mode_flow(k)
        assert A.shape == (1, 1) and b.shape == (1,)
    xml, cfg = h.to_spaceex()
    assert xml.count("<location ") == h.num_modes
    back = na.Automaton.from_spaceex(xml, cfg)
    assert back.to_json() == h.to_json()


def test_pipeline_water_safe():
    r = na.run_pipeline(model("water"), [12], eps=0.1)
    assert r["verdict"] == "safe"
    fp = r["flowpipe"]
    assert fp.csv().startswith("t_lo,t_hi,mode,")
    # RK4 trajectory stays inside the flowpipe
    t, xs = na.simulate(model("water"), np.array([0.005]), 2.0, 1e-3)
    for k in range(0, len(t), 50):
        assert fp.covers(t[k], xs[k])
    assert set(r["timing"]) == {"learner_s", "certifier_s", "safety_s", "total_s"}


def test_reach_single_mode_decay():
    # x' = -x as a zero-hidden-layer abstraction
    m = na.parse_model(
        'vars = ["x"]\nflow = ["-x"]\ndomain = [[-2, 2]]\ninit = [[0.9, 1.0]]\n'
        'bad = [[1.5, 2]]\nhorizon = 1\n'
    )
    a = na.Abstraction.from_json(
        {"net": {"dims": [1, 1], "weights": [[-1.0]], "biases": [[0.0]]},
         "e": [1e-9], "delta": 0.0, "domain": [[-2, 2]], "seed": 0, "iterations": 0}
    )
    h = na.build_automaton(a, m)
    fp = na.reach(h, step=0.001)
    assert fp.verdict == "safe"
    assert fp.covers(1.0, np.array([0.9 * math.exp(-1)]))
    assert fp.covers(1.0, np.array([math.exp(-1)]))


def test_asm():
    jet = model("jet")
    counts = [na.asm_bound(jet, g)[0] for g in (2, 4, 8)]
    assert counts == [8, 32, 128]
    assert na.asm_bound(jet, 2)[1] <= 1.33
