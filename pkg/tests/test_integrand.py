"""Expression parsing, evaluation, and first-order information.

Layout convention checked throughout: gradients and subdifferential sets
live in R^{2n} ordered (x1..xn, z1..zn).
"""

import numpy as np
import pytest

from _oracles import (
    dual_gradient,
    fd_directional,
    min_activity_margin,
    random_expr,
    random_smooth_expr,
)
from nsvar.convexgeom import Ball, MinkowskiSum, Polytope, Singleton, support
from nsvar.integrand import (
    Abs,
    Const,
    DomainError,
    EvalPoint,
    ExprError,
    Max,
    ParseError,
    SubdiffError,
    VarX,
    VarZ,
    directional_derivative,
    eval_expr,
    eval_expr_grid,
    format_expr,
    is_smooth,
    parse_expr,
    subdiff_expr,
    uses_var_z,
)

EX2 = "abs(x1 - max(t - 0.5, 0))"
EX3 = "max(pow(z1, 2) - pow(x1, 2) - 2 * t * x1, x2)"
EX4 = "norm(z1 - 1, x2) + pow(x1 - x3 - sin(t), 2)"


def _pt(x, z, t=0.0):
    return EvalPoint(np.atleast_1d(np.asarray(x, float)),
                     np.atleast_1d(np.asarray(z, float)), t)


def test_parse_structural():
    assert parse_expr("abs(x1)", 1) == Abs(VarX(1))
    e = parse_expr("max(x1, z2)", 2)
    assert e == Max((VarX(1), VarZ(2)))


def test_parse_precedence():
    p = _pt([1.0], [0.0], 0.75)
    assert eval_expr(parse_expr("2 + 3 * 4", 1), p) == 14.0
    assert eval_expr(parse_expr("2 - 3 - 4", 1), p) == -5.0
    assert eval_expr(parse_expr("(1 + 2) * 3", 1), p) == 9.0
    assert eval_expr(parse_expr("-x1 + 2", 1), p) == 1.0
    assert eval_expr(parse_expr("2 * t - 1", 1), p) == 0.5
    assert eval_expr(parse_expr("pow(2, 3)", 1), p) == 8.0


def test_parse_errors():
    with pytest.raises(ExprError, match="nonsmooth subexpression inside sin"):
        parse_expr("sin(abs(x1))", 1)
    with pytest.raises(ExprError, match="out of range"):
        parse_expr("x3", 2)
    with pytest.raises(ParseError, match="must be >= 1"):
        parse_expr("x0", 1)
    with pytest.raises(ParseError, match="at least 2"):
        parse_expr("max(x1)", 1)
    with pytest.raises(ParseError, match="integer literal"):
        parse_expr("pow(x1, t)", 1)
    with pytest.raises(ParseError, match="position 7"):
        parse_expr("(x1 + 1", 1)
    with pytest.raises(ParseError, match="unknown identifier"):
        parse_expr("foo(x1)", 1)
    with pytest.raises(ParseError):
        parse_expr("", 1)
    with pytest.raises(ExprError, match="only t"):
        parse_expr("x1 + t", 1, allow_vars=False)


def test_error_hierarchy():
    assert issubclass(ParseError, ExprError)
    assert issubclass(DomainError, ExprError)
    assert issubclass(SubdiffError, ExprError)


def test_eval_values():
    assert eval_expr(parse_expr("abs(x1)", 1), _pt([-0.5], [0.0])) == 0.5
    assert eval_expr(parse_expr(EX2, 1), _pt([-1.0], [0.0], 0.0)) == 1.0
    assert eval_expr(parse_expr(EX4, 3),
                     _pt([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.0)) == 0.0
    assert eval_expr(parse_expr("max(x1, z1, t)", 1), _pt([0.2], [0.9], 0.5)) == 0.9


def test_eval_domain_errors():
    with pytest.raises(DomainError, match="t=0.0"):
        eval_expr(parse_expr("1 / x1", 1), _pt([0.0], [0.0], 0.0))
    with pytest.raises(DomainError):
        eval_expr(parse_expr("sqrt(x1)", 1), _pt([-1.0], [0.0], 0.0))


def test_eval_grid_matches_scalar_loop():
    rng = np.random.default_rng(5)
    done = 0
    while done < 40:
        n = int(rng.integers(1, 4))
        e = random_expr(rng, n)
        x = rng.standard_normal((7, n))
        z = rng.standard_normal((7, n))
        t = np.linspace(0.0, 1.0, 7)
        try:
            vec = eval_expr_grid(e, x, z, t)
            ref = [eval_expr(e, EvalPoint(x[i], z[i], t[i])) for i in range(7)]
        except DomainError:
            continue
        assert np.allclose(vec, ref, rtol=1e-14, atol=1e-14)
        done += 1


def test_eval_grid_domain_error_reports_node():
    e = parse_expr("1 / x1", 1)
    x = np.array([[1.0], [1.0], [0.0], [1.0]])
    z = np.zeros((4, 1))
    with pytest.raises(DomainError, match="node 2"):
        eval_expr_grid(e, x, z, np.linspace(0.0, 1.0, 4))


def test_format_round_trip_builtins():
    for text, n in (("abs(x1)", 1), (EX2, 1), (EX3, 2), (EX4, 3)):
        e = parse_expr(text, n)
        assert parse_expr(format_expr(e), n) == e


def test_format_round_trip_random():
    """Formatting preserves meaning; on parser output it round-trips exactly.

    Generated trees may contain shapes the parser normalizes away (it folds
    a negated literal into the constant), so the structural check runs on
    the reparsed form.
    """
    rng = np.random.default_rng(9)
    for _ in range(200):
        n = int(rng.integers(1, 4))
        e = random_expr(rng, n)
        e2 = parse_expr(format_expr(e), n)
        assert parse_expr(format_expr(e2), n) == e2
        for _ in range(3):
            p = EvalPoint(rng.standard_normal(n), rng.standard_normal(n),
                          float(rng.random()))
            try:
                a = eval_expr(e, p)
            except DomainError:
                continue
            assert eval_expr(e2, p) == pytest.approx(a, rel=1e-14, abs=1e-14)


def test_is_smooth_and_uses_z():
    assert not is_smooth(parse_expr("abs(x1)", 1))
    assert is_smooth(parse_expr("sin(t) * x1 + pow(z1, 2)", 1))
    assert uses_var_z(parse_expr(EX4, 3))
    assert not uses_var_z(parse_expr("abs(x1) + t", 1))


def test_subdiff_abs_at_kink():
    s = subdiff_expr(parse_expr("abs(x1)", 1), _pt([0.0], [0.0]))
    assert isinstance(s, Polytope)
    rows = sorted(s.vertices.tolist())
    assert np.allclose(rows, [[-1.0, 0.0], [1.0, 0.0]])


def test_subdiff_abs_off_kink():
    s = subdiff_expr(parse_expr("abs(x1)", 1), _pt([-1.0], [0.0]))
    assert isinstance(s, Singleton)
    assert np.allclose(s.point, [-1.0, 0.0])


def test_subdiff_norm_at_kink_is_masked_ball():
    s = subdiff_expr(parse_expr("norm(z1 - 1, x2)", 2), _pt([0.0, 0.0], [1.0, 0.0]))
    assert isinstance(s, Ball)
    assert s.radius == 1.0
    assert np.allclose(s.center, 0.0)
    assert np.array_equal(s.mask, [False, True, True, False])


def test_subdiff_norm_off_kink():
    s = subdiff_expr(parse_expr("norm(z1 - 1, x2)", 3),
                     _pt([0.0, 3.0, 0.0], [5.0, 0.0, 0.0]))
    assert isinstance(s, Singleton)
    assert np.allclose(s.point, [0.0, 0.6, 0.0, 0.8, 0.0, 0.0], atol=1e-15)


def test_subdiff_smooth_plus_norm_is_sum():
    s = subdiff_expr(parse_expr(EX4, 3), _pt([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]))
    assert isinstance(s, MinkowskiSum)
    balls = [m for m in s.members if isinstance(m, Ball)]
    assert len(balls) == 1
    assert np.array_equal(balls[0].mask, [False, True, False, True, False, False])


def test_subdiff_max_tie_hull():
    s = subdiff_expr(parse_expr("max(x1, z1, t)", 1), _pt([0.5], [0.5], 0.5))
    assert isinstance(s, Polytope)
    rows = sorted(s.vertices.tolist())
    assert np.allclose(rows, [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


def test_subdiff_max_over_ball_tie_raises():
    with pytest.raises(SubdiffError, match="not representable"):
        subdiff_expr(parse_expr("max(norm(x1), z1)", 1), _pt([0.0], [0.0]))


def test_subdiff_norm_mismatched_scales_raises():
    with pytest.raises(SubdiffError, match="mismatched scales"):
        subdiff_expr(parse_expr("norm(2 * x1, x2)", 2), _pt([0.0, 0.0], [0.0, 0.0]))


def test_subdiff_scaled_max_support():
    s = subdiff_expr(parse_expr("0.5 * max(x1, z1)", 1), _pt([0.3], [0.3]))
    val, _ = support(s, np.array([1.0, 0.0]))
    assert val == pytest.approx(0.5, abs=1e-12)
    val, _ = support(s, np.array([-1.0, -1.0]))
    assert val == pytest.approx(-0.5, abs=1e-12)


def test_smooth_gradient_matches_dual_numbers():
    rng = np.random.default_rng(13)
    done = 0
    while done < 200:
        n = int(rng.integers(1, 4))
        e = random_smooth_expr(rng, n, 3)
        x = rng.standard_normal(n)
        z = rng.standard_normal(n)
        t = float(rng.random())
        try:
            s = subdiff_expr(e, EvalPoint(x, z, t))
            ref = dual_gradient(e, x, z, t)
        except DomainError:
            continue
        assert isinstance(s, Singleton)
        assert np.allclose(s.point, ref, rtol=1e-10, atol=1e-10)
        done += 1


def test_directional_derivative_examples():
    e = parse_expr("abs(x1)", 1)
    at0 = _pt([0.0], [0.0])
    assert directional_derivative(e, at0, np.array([1.0, 0.0])) == 1.0
    assert directional_derivative(e, at0, np.array([-1.0, 0.0])) == 1.0
    tie = _pt([0.3], [0.3])
    e = parse_expr("max(x1, z1)", 1)
    assert directional_derivative(e, tie, np.array([2.0, -1.0])) == 2.0
    assert directional_derivative(e, tie, np.array([-1.0, 2.0])) == 2.0
    e = parse_expr("sin(t) * x1", 1)
    p = _pt([2.0], [0.0], 0.5)
    g = np.array([3.0, 1.0])
    assert directional_derivative(e, p, g) == pytest.approx(3.0 * np.sin(0.5), abs=1e-14)


def test_directional_derivative_is_support_value():
    """For the convex pieces the grammar generates, f'(p; g) = h_{subdiff}(g)."""
    rng = np.random.default_rng(17)
    done = 0
    while done < 300:
        n = int(rng.integers(1, 4))
        e = random_expr(rng, n)
        x = rng.standard_normal(n)
        z = rng.standard_normal(n)
        t = float(rng.random())
        p = EvalPoint(x, z, t)
        g = rng.standard_normal(2 * n)
        try:
            dd = directional_derivative(e, p, g)
            val, _ = support(subdiff_expr(e, p), g)
        except DomainError:
            continue
        assert dd == pytest.approx(val, abs=1e-9 * (1.0 + abs(val)))
        done += 1


def test_directional_derivative_finite_difference():
    rng = np.random.default_rng(19)
    done = 0
    while done < 250:
        n = int(rng.integers(1, 4))
        e = random_expr(rng, n)
        x = rng.standard_normal(n)
        z = rng.standard_normal(n)
        t = float(rng.random())
        p = EvalPoint(x, z, t)
        g = rng.standard_normal(2 * n)
        g /= np.linalg.norm(g)
        try:
            if abs(eval_expr(e, p)) > 50.0 or min_activity_margin(e, p) < 1e-2:
                continue
            dd = directional_derivative(e, p, g)

            def f(a):
                return eval_expr(e, EvalPoint(x + a * g[:n], z + a * g[n:], t))

            est = fd_directional(f)
        except DomainError:
            continue
        assert dd == pytest.approx(est, abs=1e-5 * (1.0 + abs(dd)))
        done += 1
