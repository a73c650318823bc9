import numpy as np
import pytest

from cqec.core import SYNDROME_TABLE
from cqec.transients import (
    TEMPLATE_STEPS,
    ResonatorParams,
    build_transient_templates,
    resonator_response,
    steady_amplitudes,
    template_table,
)

DT = 3.2e-8


def test_response_starts_at_zero():
    ae, ag = resonator_response(0.0, ResonatorParams())
    assert ae == 0
    assert ag == 0


def test_response_steady_values():
    p = ResonatorParams()
    ae, ag = resonator_response(50.0 / p.linewidth, p)
    se, sg = steady_amplitudes(p)
    assert ae == pytest.approx(se, abs=1e-12)
    assert ag == pytest.approx(sg, abs=1e-12)
    assert se == pytest.approx(-2 * p.drive
                               / (2 * p.dispersive_shift + 2 * p.detuning
                                  + 1j * p.linewidth))


def test_response_decay_rate():
    p = ResonatorParams()
    se, _ = steady_amplitudes(p)
    t = np.linspace(0.2e-6, 2.0e-6, 40)
    ae, _ = resonator_response(t, p)
    log_dev = np.log(np.abs(ae - se))
    slope = np.polyfit(t, log_dev, 1)[0]
    assert slope == pytest.approx(-p.linewidth / 2, rel=1e-9)


def test_response_rejects_bad_linewidth():
    with pytest.raises(ValueError):
        resonator_response(0.0, ResonatorParams(linewidth=0.0))


@pytest.fixture(scope="module")
def templates():
    return build_transient_templates(ResonatorParams(), DT)


def test_all_single_flip_transitions_present(templates):
    assert len(templates) == 24
    for (pre, post), tpl in templates.items():
        assert bin(pre ^ post).count("1") == 1
        assert tpl.means.shape == (TEMPLATE_STEPS, 2)


def test_templates_start_and_settle(templates):
    for (pre, post), tpl in templates.items():
        assert np.allclose(tpl.means[0], SYNDROME_TABLE[pre], atol=1e-9)
        assert np.all(np.abs(tpl.means[-1] - SYNDROME_TABLE[post]) <= 0.05)


def test_template_sweep_4_to_6(templates):
    tpl = templates[(4, 6)]
    assert tpl.means[0, 0] == pytest.approx(-1.0)
    assert tpl.means[-1, 0] == pytest.approx(1.0, abs=0.05)
    assert tpl.means[0, 1] == pytest.approx(1.0)
    assert tpl.means[-1, 1] == pytest.approx(-1.0, abs=0.05)


def test_unchanged_channel_is_flat(templates):
    # X1 on |000> leaves S2 at +1 for the whole transient.
    tpl = templates[(0, 4)]
    assert np.all(tpl.means[:, 1] == 1.0)


def test_symmetric_transitions_share_templates(templates):
    # 0->4 and 7->3 drive identical syndrome sweeps (+,+) -> (-,+), so the
    # synthesized templates coincide channel by channel.
    assert np.allclose(templates[(0, 4)].means, templates[(7, 3)].means)


def test_templates_oscillate(templates):
    # Small linewidth rings: the sweep overshoots its settling value.
    sweep = templates[(0, 4)].means[:, 0]
    assert sweep.min() < -1.1


def test_template_table_fallback_rows(templates):
    table = template_table(templates)
    assert np.allclose(table[0], SYNDROME_TABLE[0])          # identity 0->0
    assert np.allclose(table[0 * 8 + 3], SYNDROME_TABLE[3])  # two-qubit jump
    assert np.allclose(table[0 * 8 + 4], templates[(0, 4)].means)


def test_slow_resonator_rejected():
    with pytest.raises(ValueError):
        build_transient_templates(ResonatorParams(linewidth=0.5e6), DT)
