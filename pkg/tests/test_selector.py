import math

import numpy as np
import pytest

from mixspec2d import (
    Field2D,
    FitOptions,
    InnovationSpec,
    MaCoefficients,
    ParamVector,
    SinusoidCountSelector,
    SinusoidParams,
    SupportKind,
    generate_innovations,
    select_order,
    selection_statistic,
    sinusoid_field,
    synthesize_noise,
    xi_threshold,
)

QP = SupportKind.QUARTER_PLANE
NSHP = SupportKind.NSHP


def white(kind, sigma2=1.0):
    return MaCoefficients(kind, 0, 0, {(0, 0): 1.0}, sigma2)


# ---------------------------------------------------------------------------
# penalty threshold


def test_xi_threshold_white_noise():
    assert xi_threshold(white(NSHP), margin=0.0) == pytest.approx(14.0)
    assert xi_threshold(white(QP), margin=0.0) == pytest.approx(8.0)


def test_xi_threshold_colored_example():
    ma = MaCoefficients(QP, 0, 1, {(0, 0): 1.0, (0, 1): 0.5}, 1.0)
    assert xi_threshold(ma, margin=0.01) == pytest.approx(8 * 1.8 * 1.01, rel=1e-12)


def test_xi_threshold_rejects_negative_margin():
    with pytest.raises(ValueError):
        xi_threshold(white(NSHP), margin=-0.1)


# ---------------------------------------------------------------------------
# the statistic


def test_selection_statistic_hand_values():
    assert selection_statistic(100, 1.0, 0, 14.0) == pytest.approx(0.0)
    assert selection_statistic(100, math.e, 0, 14.0) == pytest.approx(100.0)
    expected = 100.0 + 28.0 * math.log(100.0)
    assert selection_statistic(100, math.e, 2, 14.0) == pytest.approx(expected, rel=1e-12)


def test_selection_statistic_zero_loss_sentinel():
    val = selection_statistic(64, 0.0, 1, 14.0)
    assert val == float("-inf")
    assert val < selection_statistic(64, 1e-300, 2, 14.0)


def test_selection_statistic_input_checks():
    with pytest.raises(ValueError):
        selection_statistic(0, 1.0, 0, 14.0)
    with pytest.raises(ValueError):
        selection_statistic(16, -1.0, 0, 14.0)


# ---------------------------------------------------------------------------
# select_order on synthetic fields


@pytest.fixture(scope="module")
def two_component_field():
    truth = ParamVector(
        (SinusoidParams(2.0, 0.9 * math.pi, 0.4 * math.pi, 0.7),
         SinusoidParams(1.0, 0.45 * math.pi, 1.3 * math.pi, 2.1))
    )
    ma = MaCoefficients(QP, 1, 1, {(0, 0): 1.0, (0, 1): 0.5, (1, 0): 0.4, (1, 1): 0.2}, 0.2 / 1.45)
    w = synthesize_noise(ma, InnovationSpec("gaussian", ma.sigma2, 4242), 64, 64)
    return truth, ma, Field2D(sinusoid_field(truth, 64, 64) + w.values)


def test_select_order_finds_two_components(two_component_field):
    truth, ma, y = two_component_field
    result = select_order(y, q_max=5, xi=xi_threshold(ma))
    assert result.selected == 2
    assert not any(result.failed)
    # chi decreasing up to the true order, then strictly above the minimum
    assert result.chi[0] > result.chi[1] > result.chi[2]
    assert result.chi[3] > result.chi[2]
    assert result.chi[4] > result.chi[2]


def test_select_order_chi_recomputable(two_component_field):
    _, ma, y = two_component_field
    result = select_order(y, q_max=4, xi=xi_threshold(ma))
    for k in range(result.q_max):
        expected = selection_statistic(result.nm, result.losses[k], k, result.xi)
        assert result.chi[k] == pytest.approx(expected, abs=1e-12)


def test_select_order_pure_noise_small():
    w = generate_innovations(InnovationSpec("gaussian", 1.0, 31337), 64, 64)
    result = select_order(w, q_max=3, xi=xi_threshold(white(NSHP)))
    assert result.selected == 0


def test_penalty_monotonicity(two_component_field):
    _, ma, y = two_component_field
    base = select_order(y, q_max=5, xi=xi_threshold(ma))
    losses = base.losses
    nm = base.nm
    previous = None
    for xi in (1.0, 5.0, 20.0, 100.0, 1000.0, 1e5):
        chi = [selection_statistic(nm, losses[k], k, xi) for k in range(5)]
        pick = int(np.argmin(chi))
        if previous is not None:
            assert pick <= previous
        previous = pick


def test_scaling_invariance(two_component_field):
    _, ma, y = two_component_field
    xi = xi_threshold(ma)
    base = select_order(y, q_max=4, xi=xi)
    scaled = select_order(Field2D(3.0 * y.values), q_max=4, xi=xi)
    assert scaled.selected == base.selected
    for k in range(4):
        assert scaled.losses[k] == pytest.approx(9.0 * base.losses[k], rel=1e-9)


def test_select_order_zero_field_flags_failures():
    y = Field2D(np.zeros((16, 16)))
    result = select_order(y, q_max=3, xi=14.0)
    assert result.selected == 0
    assert result.losses[0] == 0.0
    assert result.chi[0] == float("-inf")
    assert result.failed[1] and result.failed[2]
    assert math.isnan(result.losses[1])


def test_select_order_argument_checks(two_component_field):
    _, _, y = two_component_field
    with pytest.raises(ValueError):
        select_order(y, q_max=0, xi=14.0)
    with pytest.raises(ValueError):
        select_order(y, q_max=3, xi=0.0)
    with pytest.raises(ValueError):
        select_order(y, q_max=3, xi=None)
    with pytest.raises(ValueError):
        select_order(y, q_max=30, xi=14.0, options=FitOptions(k_max=16))


def test_selection_csv_rows(two_component_field):
    _, ma, y = two_component_field
    result = select_order(y, q_max=3, xi=xi_threshold(ma))
    rows = result.csv_rows()
    assert rows[0] == "k,loss,chi,failed"
    assert len(rows) == 4
    k, loss_txt, chi_txt, failed = rows[1].split(",")
    assert k == "0"
    assert float(loss_txt) == pytest.approx(result.losses[0])
    assert failed == "0"


# ---------------------------------------------------------------------------
# sklearn-style wrapper


def test_count_selector_api(two_component_field):
    _, ma, y = two_component_field
    sel = SinusoidCountSelector(q_max=5, ma=ma)
    sel.fit(y.values)
    assert sel.order_ == 2
    assert sel.predict() == 2
    assert sel.components_.shape == (2, 4)
    assert len(sel.losses_) == 5


def test_count_selector_requires_xi_or_ma():
    sel = SinusoidCountSelector(q_max=3)
    with pytest.raises(ValueError):
        sel.fit(np.random.default_rng(0).standard_normal((32, 32)))


def test_count_selector_fixed_xi(two_component_field):
    _, _, y = two_component_field
    sel = SinusoidCountSelector(q_max=4, xi=30.0).fit(y)
    assert sel.order_ == 2
