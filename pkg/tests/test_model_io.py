from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonsmooth_atlas.errors import (
    EvaluationFailure,
    ExprSyntaxError,
    NonregularSurface,
    SchemaError,
    UnknownIdentifier,
    UnknownModel,
    UnknownParameter,
)
from nonsmooth_atlas.filippov import integrate_hybrid, lie_derivative
from nonsmooth_atlas.model_io import (
    BinOp,
    Call,
    Const,
    Neg,
    Param,
    Var,
    builtin_model,
    evaluate,
    load_config,
    parse_expression,
    to_source,
)

TOY_INLINE = {
    "model": {
        "f_left": ["0", "-2", "1"],
        "f_right": ["X2", "-X1 + eta*X2 - X2^3", "-X3/5"],
        "h": "nu - X1 - 2*X2 - 3*X3",
    },
    "params": {"nu": 0.2, "eta": 0.2},
}

HP_RIGHT = [
    "X1*(1 - X1) - a1*X1/(1 + b1*X1)*X2",
    "a1*X1/(1 + b1*X1)*X2 - a2*X2/(1 + b2*X2)*X3 - d1*X2",
    "a2*X2/(1 + b2*X2)*X3 - d2*X3",
]


def _hp_inline(q, h, pnames=("xi", "b1")):
    left = [f"({HP_RIGHT[i]}) - ({q[i]})*X{i + 1}" for i in range(3)]
    return {
        "model": {"f_left": left, "f_right": HP_RIGHT, "h": h, "bifurcation_params": list(pnames)},
        "params": {"xi": 12.9, "b1": 2.2},
        "overrides": {"a1": 5.0, "a2": 0.1, "b2": 2.0, "d1": 0.4, "d2": 0.01},
    }


# ---------------------------------------------------------------- parser

def test_parse_variable():
    assert parse_expression("X2") == Var("X2")


def test_holling_response_value():
    node = parse_expression("a1*X1/(1 + b1*X1)")
    assert evaluate(node, {"X1": 1.0, "a1": 5.0, "b1": 3.0}) == pytest.approx(1.25)


def test_unbound_identifier():
    with pytest.raises(UnknownIdentifier):
        parse_expression("X1*(1-X1) - f", params=[])
    with pytest.raises(UnknownIdentifier):
        evaluate(parse_expression("X1 - f"), {"X1": 1.0})


def test_precedence_and_associativity():
    env = {"X1": 2.0}
    assert evaluate(parse_expression("2^3^2"), env) == 2.0 ** 9
    assert evaluate(parse_expression("-X1^2"), env) == -4.0
    assert evaluate(parse_expression("8/2/2"), env) == 2.0
    assert evaluate(parse_expression("1 - 2 - 3"), env) == -4.0
    assert evaluate(parse_expression("2*3 + 4*5"), env) == 26.0


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as exc:
        parse_expression("1 + * 2")
    assert exc.value.position == 4


def test_tiny_denominator_raises():
    with pytest.raises(EvaluationFailure):
        evaluate(parse_expression("1/X1"), {"X1": 1e-301})


def _trees():
    leaves = st.one_of(
        st.floats(-1e6, 1e6, allow_nan=False).map(lambda v: Const(abs(v))),
        st.sampled_from(["X1", "X2", "X3"]).map(Var),
        st.sampled_from(["a", "nu", "b1"]).map(Param),
    )

    def extend(children):
        return st.one_of(
            children.map(Neg),
            st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
            st.tuples(st.sampled_from(["sin", "cos", "exp", "log", "sqrt"]), children).map(lambda t: Call(*t)),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_trees())
def test_print_parse_identity(tree):
    assert parse_expression(to_source(tree)) == tree


# ---------------------------------------------------------------- built-ins

def test_builtin_defaults():
    toy = builtin_model("toy")
    x = np.array([0.3, -1.2, 2.5])
    assert np.array_equal(toy.f_left(x, [0.1, 0.2]), [0.0, -2.0, 1.0])
    pest = builtin_model("hastings_powell_pest")
    assert pest.h(np.array([0.5, 0.2, 12.9]), [12.9, 2.2]) == 0.0
    harvest = builtin_model("hastings_powell_harvest")
    mu = [0.78, 2.2]
    diff = harvest.f_right(x, mu) - harvest.f_left(x, mu)
    assert np.allclose(diff, [0.09 * x[0], 0.01 * x[1], 0.001 * x[2]], rtol=1e-14)


def test_builtin_errors():
    with pytest.raises(UnknownModel):
        builtin_model("lorenz")
    with pytest.raises(UnknownParameter):
        builtin_model("toy", {"a1": 1.0})


# ---------------------------------------------------------------- configuration

def test_config_builtin_toy():
    cfg = load_config(json.dumps({"model": "toy", "params": {"nu": 0.2, "eta": 0.2}}))
    model, mu = cfg.build()
    assert model.name == "toy" and np.array_equal(mu, [0.2, 0.2])


def test_config_round_trip():
    for doc in (TOY_INLINE, _hp_inline((0.0, 0.05, -0.01), "X3 - xi"),
                {"model": "hastings_powell_pest", "params": {"b1": 2.2}, "overrides": {"d2": 0.012}}):
        cfg = load_config(json.dumps(doc))
        assert load_config(cfg.dumps()) == cfg


def test_config_errors():
    with pytest.raises(SchemaError):
        load_config("{not json")
    with pytest.raises(SchemaError):
        load_config(json.dumps({"params": {}}))
    with pytest.raises(UnknownModel):
        load_config(json.dumps({"model": "nope"}))
    with pytest.raises(UnknownParameter):
        load_config(json.dumps({"model": "toy", "params": {"zeta": 1.0}}))
    bad = json.loads(json.dumps(TOY_INLINE))
    bad["model"]["h"] = "nu - X1 - kappa"
    with pytest.raises(UnknownIdentifier):
        load_config(json.dumps(bad))


def test_degenerate_surface_rejected():
    doc = json.loads(json.dumps(TOY_INLINE))
    doc["model"]["h"] = "0"
    model, mu = load_config(json.dumps(doc)).build()
    with pytest.raises(NonregularSurface):
        lie_derivative(model, "Left", [0.0, 0.0, 0.0], mu)


def _random_states(rng, n, centre, scale):
    return centre + scale * rng.uniform(-1.0, 1.0, size=(n, 3))


@pytest.mark.parametrize("name,doc,centre,scale", [
    ("toy", TOY_INLINE, np.zeros(3), 2.0),
    ("hastings_powell_pest", _hp_inline((0.0, 0.05, -0.01), "X3 - xi"), np.array([0.7, 0.2, 10.0]), 0.3),
    ("hastings_powell_harvest", _hp_inline((0.09, 0.01, 0.001), "xi - X1"), np.array([0.7, 0.2, 10.0]), 0.3),
])
def test_inline_clone_matches_builtin(name, doc, centre, scale):
    inline, mu = load_config(json.dumps(doc)).build()
    builtin = builtin_model(name)
    rng = np.random.default_rng(7)
    for x in _random_states(rng, 1000, centre, scale):
        for f, g in ((inline.f_left, builtin.f_left), (inline.f_right, builtin.f_right)):
            a, b = f(x, mu), g(x, mu)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
        assert abs(inline.h(x, mu) - builtin.h(x, mu)) <= 1e-12 * max(1.0, abs(builtin.h(x, mu)))


def test_inline_trajectory_matches_builtin():
    inline, mu = load_config(json.dumps(TOY_INLINE)).build()
    builtin = builtin_model("toy")
    x0 = [0.16, -0.28, -0.28]
    a = integrate_hybrid(inline, x0, mu, 30.0)
    b = integrate_hybrid(builtin, x0, mu, 30.0)
    assert [s.regime for s in a.segments] == [s.regime for s in b.segments]
    assert np.allclose(a.final_state, b.final_state, atol=1e-6)
