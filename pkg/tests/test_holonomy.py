import numpy as np
import pytest
from scipy.linalg import expm

from varjet.holonomy import (ConnectionForm, Path, compose, constant_path, holonomy,
                             reverse, straight_path, thin_invariance_probe, trace_distance)
from varjet.symexpr import BundleSignature, parse_expression

NAMES = ("x", "y")
PATH_SIG = BundleSignature(("s",), ("gamma",))
XY_SIG = BundleSignature(NAMES, ("zz",))


def path(*texts):
    return Path([parse_expression(t.replace("**", "^"), PATH_SIG) for t in texts], names=NAMES)


def xy(text):
    return parse_expression(text.replace("**", "^"), XY_SIG)


def u1(ax, ay):
    """A = i (ax dx + ay dy)."""
    return ConnectionForm("U1", NAMES, [[[0]], [[0]]], [[[xy(ax)]], [[xy(ay)]]])


def su2_field():
    # A_x = i(y sigma_z + sigma_x)/2, A_y = i x sigma_y / 2 (anti-Hermitian, traceless)
    re_x = [[0, 0], [0, 0]]
    im_x = [[xy("y/2"), xy("1/2")], [xy("1/2"), xy("-y/2")]]
    re_y = [[0, xy("x/2")], [xy("-x/2"), 0]]
    im_y = [[0, 0], [0, 0]]
    return ConnectionForm("SU2", NAMES, [re_x, re_y], [im_x, im_y])


PAIR = (path("s", "s^2"), path("1 - s", "1 + s"))  # second starts where first ends


def test_zero_connection_gives_identity():
    A = ConnectionForm("U1", NAMES, [[[0]], [[0]]])
    assert holonomy(A, path("s^2", "3*s"), 64).distance(np.eye(1)) == 0


def test_constant_path_gives_identity():
    H = holonomy(su2_field(), constant_path([1, 2], NAMES), 64)
    assert H.distance(np.eye(2)) < 1e-14


@pytest.mark.parametrize("name", ["constant_k", "exact", "rotational", "polynomial"])
def test_u1_against_line_integral(name, oracles):
    case = oracles["u1"][name]
    H = holonomy(u1(*case["a"]), path(*case["path"]), 4096)
    expected = complex(*case["phase"])
    assert abs(H.matrix[0, 0] - expected) < 1e-8
    assert H.unitarity_defect() < 1e-8


def test_constant_su2_matches_matrix_exponential():
    # constant A along a straight path: H = expm(-A(v))
    ax = np.array([[0.3j, 0.2 + 0.1j], [-0.2 + 0.1j, -0.3j]])
    A = ConnectionForm("SU2", NAMES, [[[0, xy("1/5")], [xy("-1/5"), 0]], [[0, 0], [0, 0]]],
                       [[[xy("3/10"), xy("1/10")], [xy("1/10"), xy("-3/10")]], [[0, 0], [0, 0]]])
    H = holonomy(A, straight_path([0, 0], [2, 0], NAMES), 1024)
    assert H.distance(expm(-2 * ax)) < 1e-10


def test_composition_law():
    A = su2_field()
    g1, g2 = (p.with_sitting_instants() for p in PAIR)
    H = holonomy(A, compose(g2, g1), 4096)
    assert H.distance(holonomy(A, g2, 4096) @ holonomy(A, g1, 4096)) < 1e-7
    assert H.unitarity_defect() < 1e-8


def test_reverse_gives_inverse():
    A = su2_field()
    g = PAIR[0]
    H, Hr = holonomy(A, g, 4096), holonomy(A, reverse(g), 4096)
    assert Hr.distance(H.inverse()) < 1e-8
    assert (Hr @ H).distance(np.eye(2)) < 1e-7


def test_thin_invariance():
    A = su2_field()
    g = PAIR[0].with_sitting_instants()
    s = parse_expression("s", PATH_SIG)
    rep = thin_invariance_probe(A, g, [s], 4096)
    assert rep["max_deviation"] < 1e-12
    rep = thin_invariance_probe(A, g, [s ** 2, s ** 3, 3 * s ** 2 - 2 * s ** 3], 4096,
                                retracings=[path("1 + 2*s", "1 - s^2")])
    assert rep["max_deviation"] < 1e-7
    assert len(rep["deviations"]) == 4


def test_retracing_cancels_for_u1(oracles):
    case = oracles["u1"]["polynomial"]
    A = u1(*case["a"])
    g = path(*case["path"])
    sigma = straight_path([2, 1], [-1, 3], NAMES)
    H = holonomy(A, compose(compose(reverse(sigma), sigma), g), 4096)
    assert abs(H.matrix[0, 0] - complex(*case["phase"])) < 1e-7


def test_non_monotone_reparametrization_rejected():
    A = su2_field()
    bad = parse_expression("3*s^2 - 2*s", PATH_SIG)  # dips below zero
    with pytest.raises(ValueError):
        thin_invariance_probe(A, PAIR[0], [bad])
    with pytest.raises(ValueError):
        PAIR[0].reparametrize(parse_expression("s/2", PATH_SIG))


def test_compose_and_reverse_traces():
    g = straight_path([0, 0], [2, 2], NAMES)
    whole = compose(straight_path([1, 1], [2, 2], NAMES), straight_path([0, 0], [1, 1], NAMES))
    assert trace_distance(whole, g) < 1e-2
    assert np.allclose(whole.start, [0, 0]) and np.allclose(whole.end, [2, 2])
    padded = compose(g, constant_path([0, 0], NAMES))
    assert trace_distance(padded, g) < 1e-2
    with pytest.raises(ValueError):
        compose(g, straight_path([5, 5], [6, 6], NAMES))
    r = reverse(PAIR[0])
    assert np.allclose(r.start, PAIR[0].end) and np.allclose(r.end, PAIR[0].start)
    assert trace_distance(reverse(r), PAIR[0]) < 1e-12
    c = constant_path([1, 2], NAMES)
    assert trace_distance(reverse(c), c) == 0


def test_validation_errors():
    with pytest.raises(ValueError):
        holonomy(su2_field(), PAIR[0], 8)
    with pytest.raises(ValueError):
        ConnectionForm("U1", NAMES, [[[xy("x")]], [[0]]])  # real part: not anti-Hermitian
    with pytest.raises(ValueError):
        ConnectionForm("SU2", NAMES, [[[0, 0], [0, 0]], [[0, 0], [0, 0]]],
                       [[[1, 0], [0, 1]], [[0, 0], [0, 0]]])  # not traceless
    with pytest.raises(ValueError):
        ConnectionForm("SO3", NAMES, [[[0]], [[0]]])
    GL = ConnectionForm("GL", NAMES, [[[xy("x")]], [[0]]])
    H = holonomy(GL, straight_path([0, 0], [1, 0], NAMES), 256)
    assert abs(H.matrix[0, 0] - np.exp(-0.5)) < 1e-10
    with pytest.raises(FloatingPointError):
        holonomy(ConnectionForm("GL", NAMES, [[[xy("-x^9")]], [[0]]]),
                 straight_path([0, 0], [30, 0], NAMES), 16)
