import numpy as np
import pytest

from bitmosaic.costs import (CostRow, account, bi_linear_cost, compare_costs,
                             conv_cost, norm_cost, psnr, ssim)
from bitmosaic.pipeline import ModelConfig
from bitmosaic.tensor_ops import ShapeError


def test_bi_linear_cost_hand_case():
    # 256 -> 256 binary linear: 65536/32 = 2048 effective binary params
    # plus 256 alpha + 256 S sidecars = 2560 total
    row = bi_linear_cost("x", 256, 256, n_pos=1.0)
    assert row.binary_params_eff == 2048
    assert row.float_params == 512
    assert row.params == 2560


def test_ops_division_hand_case():
    # 8.59G raw binary ops / 64 = 134.2M effective
    raw = 8.59e9
    n_pos = raw / (2.0 * 256 * 256)
    row = bi_linear_cost("x", 256, 256, n_pos=n_pos)
    assert np.isclose(row.binary_ops_eff, raw / 64.0)
    assert np.isclose(row.binary_ops_eff / 1e6, 134.2, atol=0.1)


def test_fp_layer_passes_through_undivided():
    row = bi_linear_cost("x", 64, 32, n_pos=10.0, binary=False)
    assert row.params == 64 * 32
    assert row.ops == 2.0 * 64 * 32 * 10.0
    assert row.binary_params_eff == 0.0


def test_conv_cost_depthwise_and_bias():
    dw = conv_cost("d", 8, 8, 3, n_pos=4.0, binary=True, depthwise=True)
    assert dw.binary_params_eff == 8 * 9 / 32.0
    fp = conv_cost("f", 3, 8, 3, n_pos=4.0, binary=False, bias=True)
    assert fp.float_params == 8 * 3 * 9 + 8
    assert fp.float_ops == 2.0 * 8 * 3 * 9 * 4.0 + 4.0 * 8


def test_norm_cost():
    row = norm_cost("n", 16, 10.0)
    assert row.float_params == 32
    assert row.float_ops == 960.0


def test_report_totals_are_additive():
    rep = account(ModelConfig())
    assert np.isclose(rep.params_total, sum(r.params for r in rep.rows))
    assert np.isclose(rep.ops_total, sum(r.ops for r in rep.rows))
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0].startswith("name,")
    assert csv_text.splitlines()[-1].startswith("TOTAL")


def test_ops_scale_with_resolution():
    a = account(ModelConfig(), (256, 256))
    b = account(ModelConfig(), (512, 512))
    assert np.isclose(b.ops_total / a.ops_total, 4.0, atol=0.01)
    assert np.isclose(b.params_total, a.params_total)


def test_default_config_calibration():
    rep = account(ModelConfig())
    assert abs(rep.params_total - 1.28e6) / 1.28e6 < 0.20


def test_fp_vs_binary_mamba_reductions():
    bi = account(ModelConfig())
    fp = account(ModelConfig(mamba_precision="float"))
    cmp = compare_costs(fp, bi)
    assert 75.0 <= cmp["param_reduction_pct"] <= 85.0
    assert 83.0 <= cmp["ops_reduction_pct"] <= 92.0


def test_compare_costs_requires_same_resolution():
    with pytest.raises(ValueError):
        compare_costs(account(ModelConfig(), (128, 128)),
                      account(ModelConfig(), (256, 256)))


def test_psnr_hand_case():
    a = np.array([0.0, 1.0])
    b = np.array([0.5, 0.5])
    # mse = 0.25 -> 10*log10(1/0.25) = 6.0206 dB
    assert np.isclose(psnr(a, b), 6.0206, atol=1e-3)


def test_psnr_identical_is_capped():
    a = np.random.default_rng(0).random((16, 16, 3))
    assert psnr(a, a) == 100.0


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(np.zeros((4, 4)), np.zeros((5, 4)))


def test_ssim_bounds_and_identity():
    rng = np.random.default_rng(1)
    a = rng.random((32, 32, 3))
    b = rng.random((32, 32, 3))
    assert np.isclose(ssim(a, a), 1.0, atol=1e-9)
    s = ssim(a, b)
    assert -1.0 <= s < 1.0


def test_ssim_penalizes_structure_loss_more_than_bias():
    rng = np.random.default_rng(2)
    a = rng.random((32, 32, 3)) * 0.5 + 0.25
    biased = np.clip(a + 0.05, 0, 1)
    shuffled = rng.permutation(a.reshape(-1)).reshape(a.shape)
    assert ssim(a, biased) > ssim(a, shuffled)


def test_cost_row_properties():
    row = CostRow("r", float_params=10, binary_params_eff=2.5,
                  float_ops=100, binary_ops_eff=7.5)
    assert row.params == 12.5
    assert row.ops == 107.5
