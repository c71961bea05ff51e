import dataclasses

import pytest
from hypothesis import assume, given, strategies as st

from stairprune.dispatch import (
    DeviceProfile,
    DirectReference,
    EmulatorConfig,
    GemmCostCoefficients,
    KernelCostBreakdown,
    Method,
    SplitPolicy,
    WorkGroupPolicy,
    calibrate_gemm,
    count_dispatched_jobs,
    direct_cost,
    emulate_latency,
    fit_workgroup_penalties,
    format_config,
    gemm_cost,
    load_config,
    parse_config,
    resolve_method,
    select_workgroup,
    split_gemm_channels,
)
from stairprune.errors import CalibrationError, DegenerateCalibrationError, RangeError, ValidationError
from stairprune.model import make_layer_spec
from stairprune.reference import DIRECT_WORKGROUP_OBSERVATIONS, LAYER16_GEMM_COUNTS


L16 = make_layer_spec("ResNet.L16", 128, 128, 3, input_h=28, stride=1, padding=1)


def at(layer, c):
    return dataclasses.replace(layer, out_channels=c)


# --- split ---------------------------------------------------------------------


@pytest.mark.parametrize("channels", [92, 93, 96, 97])
def test_split_matches_widths_read_off_tables(channels):
    unit = 8_833_916  # 848,055,936 / 96
    table = LAYER16_GEMM_COUNTS[channels]
    widths = [k.arith_instr // unit for k in table.gemm_kernels]
    assert all(k.arith_instr % unit == 0 for k in table.gemm_kernels)
    assert split_gemm_channels(channels) == widths


@pytest.mark.parametrize("channels, expected", [(92, [80, 12]), (93, [96]), (94, [96]), (95, [96]),
                                                (96, [96]), (97, [96, 4]), (4, [4]), (1, [4]), (13, [16])])
def test_split_examples(channels, expected):
    assert split_gemm_channels(channels) == expected


def test_split_without_merge():
    assert split_gemm_channels(93, SplitPolicy(merge_full_tile_remainder=False)) == [80, 16]


def test_split_rejects_zero():
    with pytest.raises(RangeError):
        split_gemm_channels(0)


def test_split_policy_validates_tile():
    with pytest.raises(ValidationError):
        SplitPolicy(vector_width=4, main_tile=18)


@given(c=st.integers(1, 5000), vw=st.sampled_from([1, 2, 4, 8]), mult=st.integers(1, 8), merge=st.booleans())
def test_split_invariants(c, vw, mult, merge):
    policy = SplitPolicy(vw, vw * mult, merge)
    widths = split_gemm_channels(c, policy)
    assert 1 <= len(widths) <= 2
    assert all(w > 0 and w % vw == 0 for w in widths)
    assert c <= sum(widths) < c + vw


# --- gemm cost and calibration ---------------------------------------------------


def test_gemm_cost_reproduces_92(layer16, layer16_coeffs):
    table = gemm_cost(at(layer16, 92), layer16_coeffs)
    assert [(k.arith_instr, k.mem_instr) for k in table.gemm_kernels] == [
        (706_713_280, 36_267_840), (106_006_992, 5_440_176)]


@pytest.mark.parametrize("channels", [92, 93, 96, 97])
def test_gemm_cost_matches_every_table(layer16, layer16_coeffs, channels):
    assert gemm_cost(at(layer16, channels), layer16_coeffs) == LAYER16_GEMM_COUNTS[channels]


def test_gemm_cost_requires_calibration(layer16, layer16_coeffs):
    with pytest.raises(CalibrationError):
        gemm_cost(layer16, dataclasses.replace(layer16_coeffs, gemm_arith_unit=0))


def test_gemm_total_is_unit_times_padded_width(layer16, layer16_coeffs):
    for c in range(1, 200):
        table = gemm_cost(at(layer16, c), layer16_coeffs)
        assert sum(k.arith_instr for k in table.gemm_kernels) == 8_833_916 * sum(split_gemm_channels(c))


def test_calibrate_from_92_and_93(layer16_coeffs):
    coeffs = calibrate_gemm(LAYER16_GEMM_COUNTS[92], LAYER16_GEMM_COUNTS[93])
    assert coeffs == layer16_coeffs
    assert coeffs.im2col_arith_slope == 13_836 and coeffs.im2col_mem_slope == 2_306
    assert coeffs.gemm_arith_unit == 8_833_916 and coeffs.gemm_mem_unit == 453_348


def test_calibrate_argument_order_irrelevant():
    a, b = LAYER16_GEMM_COUNTS[97], LAYER16_GEMM_COUNTS[96]
    assert calibrate_gemm(a, b) == calibrate_gemm(b, a)


def test_calibrate_degenerate():
    with pytest.raises(DegenerateCalibrationError):
        calibrate_gemm(LAYER16_GEMM_COUNTS[93], LAYER16_GEMM_COUNTS[93])


def test_calibrate_needs_single_kernel_table():
    with pytest.raises(CalibrationError):
        calibrate_gemm(LAYER16_GEMM_COUNTS[92], LAYER16_GEMM_COUNTS[97])


def test_calibrate_rejects_tables_inconsistent_with_split():
    t93 = LAYER16_GEMM_COUNTS[93]
    kernels = list(t93.kernels)
    kernels[2] = dataclasses.replace(kernels[2], arith_instr=kernels[2].arith_instr + 1)
    with pytest.raises(CalibrationError):
        calibrate_gemm(LAYER16_GEMM_COUNTS[92], KernelCostBreakdown(93, tuple(kernels)))


coefficient_sets = st.builds(
    GemmCostCoefficients,
    im2col_arith_slope=st.integers(0, 10**6),
    im2col_arith_intercept=st.integers(0, 10**7),
    im2col_mem_slope=st.integers(0, 10**5),
    im2col_mem_intercept=st.integers(0, 10**6),
    reshape_arith_const=st.integers(0, 10**9),
    reshape_mem_const=st.integers(0, 10**8),
    gemm_arith_unit=st.integers(1, 10**8),
    gemm_mem_unit=st.integers(1, 10**7),
)


@given(coeffs=coefficient_sets, c1=st.integers(1, 2048), c2=st.integers(1, 2048))
def test_calibration_round_trip(coeffs, c1, c2):
    assume(c1 != c2)
    assume(len(split_gemm_channels(c1)) == 1 or len(split_gemm_channels(c2)) == 1)
    t1, t2 = gemm_cost(at(L16, c1), coeffs), gemm_cost(at(L16, c2), coeffs)
    assert calibrate_gemm(t1, t2) == coeffs


def test_kernel_table_csv_round_trip():
    table = LAYER16_GEMM_COUNTS[97]
    text = table.to_csv()
    assert text.splitlines()[0] == "kernel_name,arith_instr,mem_instr"
    assert text.splitlines()[1] == "im2col3x3_nhwc,1434378,223682"
    assert KernelCostBreakdown.from_csv(text, 97) == table


# --- direct path and work groups --------------------------------------------------


def test_direct_cost_relative_values(layer16):
    base = 10**9
    rel = {c: direct_cost(at(layer16, c), base, 90) / base for c in (91, 92, 93)}
    assert round(rel[91], 3) == 1.011
    assert abs(rel[93] - 1.033) <= 0.001
    assert direct_cost(at(layer16, 90), base, 90) == base


def test_direct_cost_range(layer16):
    with pytest.raises(RangeError):
        direct_cost(layer16, 100, 0)


def table_policy():
    return WorkGroupPolicy(mapping={c: s for c, s, _, _ in DIRECT_WORKGROUP_OBSERVATIONS})


@pytest.mark.parametrize("c, shape", [(90, (2, 1, 8)), (91, (1, 1, 8)), (92, (4, 1, 1)), (93, (1, 1, 8))])
def test_select_workgroup_observed(c, shape):
    assert select_workgroup(c, table_policy()) == shape


def test_select_workgroup_defaults():
    assert select_workgroup(500, table_policy()) == (1, 1, 8)
    assert select_workgroup(91, WorkGroupPolicy(default=(4, 1, 1))) == (4, 1, 1)


def test_workgroup_penalty_invariants():
    with pytest.raises(ValidationError):
        WorkGroupPolicy(penalty={(1, 1, 8): 1.2})
    with pytest.raises(ValidationError):
        WorkGroupPolicy(default=(0, 1, 1))


def test_fit_workgroup_penalties():
    # runtime / relative instructions, normalised to the fastest shape (4x1x1 at 92)
    fitted = fit_workgroup_penalties(DIRECT_WORKGROUP_OBSERVATIONS)
    norm = 168.8311 / 1.023
    assert fitted[(4, 1, 1)] == 1.0
    assert fitted[(2, 1, 8)] == pytest.approx(167.8716 / norm)
    assert fitted[(1, 1, 8)] == pytest.approx((198.0468 / 1.011 + 202.7299 / 1.034) / 2 / norm)
    assert 1.18 < fitted[(1, 1, 8)] < 1.21


# --- jobs and latency --------------------------------------------------------------


@pytest.mark.parametrize("c, jobs", [(92, 4), (93, 3), (96, 3), (97, 4)])
def test_job_counts_match_table_rows(layer16, c, jobs):
    assert count_dispatched_jobs(at(layer16, c), Method.GEMM) == jobs == len(LAYER16_GEMM_COUNTS[c].kernels)


def test_direct_is_one_job(layer16):
    assert count_dispatched_jobs(layer16, "direct") == 1


def test_tvm_routing():
    profile = DeviceProfile(1.0, 1.0, tvm_direct_channels={7})
    assert resolve_method("tvm", 7, profile) is Method.DIRECT
    assert resolve_method("tvm", 8, profile) is Method.GEMM
    with pytest.raises(ValidationError):
        count_dispatched_jobs(make_layer_spec("l", 1, 7, 1, input_h=1), "tvm")


def test_null_device_is_zero(layer16, layer16_coeffs):
    assert emulate_latency(layer16, "gemm", layer16_coeffs, DeviceProfile(0.0, 0.0, 0.0)) == 0.0


def test_extra_job_costs_exactly_one_overhead(layer16, layer16_coeffs):
    overhead = 2.5
    with_jobs = DeviceProfile(0.01, 0.05, overhead)
    no_jobs = DeviceProfile(0.01, 0.05, 0.0)
    t92 = emulate_latency(at(layer16, 92), "gemm", layer16_coeffs, with_jobs)
    t93 = emulate_latency(at(layer16, 93), "gemm", layer16_coeffs, with_jobs)
    i92 = emulate_latency(at(layer16, 92), "gemm", layer16_coeffs, no_jobs)
    i93 = emulate_latency(at(layer16, 93), "gemm", layer16_coeffs, no_jobs)
    assert t92 - i92 == pytest.approx(4 * overhead)
    assert t93 - i93 == pytest.approx(3 * overhead)
    assert (t92 - i92) - (t93 - i93) == pytest.approx(overhead)


def test_latency_by_hand(layer16, layer16_coeffs):
    table = LAYER16_GEMM_COUNTS[96]
    arith = sum(k.arith_instr for k in table.kernels)
    mem = sum(k.mem_instr for k in table.kernels)
    expected = (arith * 0.01 + mem * 0.05) / 1e6 + 3 * 4.0
    got = emulate_latency(at(layer16, 96), "gemm", layer16_coeffs, DeviceProfile(0.01, 0.05, 4.0))
    assert got == pytest.approx(expected, rel=1e-12)


def test_direct_latency_applies_workgroup_penalty(layer16):
    policy = WorkGroupPolicy(mapping={90: (2, 1, 8)}, default=(1, 1, 8), penalty={(2, 1, 8): 1.0, (1, 1, 8): 1.5})
    profile = DeviceProfile(1.0, 0.0, 0.0, workgroup_policy=policy)
    ref = DirectReference(9_000_000, 0, 90)
    assert emulate_latency(at(layer16, 90), "direct", None, profile, ref) == pytest.approx(9.0)
    assert emulate_latency(at(layer16, 91), "direct", None, profile, ref) == pytest.approx(9.1 * 1.5)


def test_missing_calibration(layer16):
    profile = DeviceProfile(1.0, 1.0)
    with pytest.raises(CalibrationError):
        emulate_latency(layer16, "gemm", None, profile)
    with pytest.raises(CalibrationError):
        emulate_latency(layer16, "direct", None, profile)


def test_emulation_is_deterministic(layer16, layer16_coeffs):
    profile = DeviceProfile(0.013, 0.041, 1.7)
    runs = {emulate_latency(at(layer16, c), "gemm", layer16_coeffs, profile) for c in [77] * 3}
    assert len(runs) == 1


rates = st.floats(0, 1, allow_nan=False)


@given(a=rates, m=rates, j=st.floats(0, 10), bump=st.floats(0, 1), which=st.sampled_from(range(3)),
       c=st.integers(1, 300), method=st.sampled_from(["gemm", "direct", "tvm"]))
def test_latency_monotone_in_rates(a, m, j, bump, which, c, method):
    values = [a, m, j]
    lower = DeviceProfile(*values, tvm_direct_channels={c})
    values[which] += bump
    higher = DeviceProfile(*values, tvm_direct_channels={c})
    ref = DirectReference(10**9, 10**8, 90)
    layer, coeffs = at(L16, c), load_config("layer16").gemm
    assert emulate_latency(layer, method, coeffs, lower, ref) <= emulate_latency(layer, method, coeffs, higher, ref)


# --- config files ------------------------------------------------------------------


def test_bundled_profile_matches_calibration():
    config = load_config("layer16")
    assert config.gemm == calibrate_gemm(LAYER16_GEMM_COUNTS[92], LAYER16_GEMM_COUNTS[93])
    assert config.split == SplitPolicy()
    fitted = fit_workgroup_penalties(DIRECT_WORKGROUP_OBSERVATIONS)
    for shape, value in fitted.items():
        assert config.profile.workgroup_policy.penalty[shape] == pytest.approx(value, abs=1e-4)
    assert select_workgroup(92, config.profile.workgroup_policy) == (4, 1, 1)


def test_config_round_trip():
    config = load_config("layer16")
    assert parse_config(format_config(config)) == config


def test_minimal_config():
    config = parse_config("[device]\nns_per_arith_instr = 1\nns_per_mem_instr = 2\n")
    assert config == EmulatorConfig(DeviceProfile(1.0, 2.0))


@pytest.mark.parametrize("text", [
    "",
    "[device]\nns_per_arith_instr = x\nns_per_mem_instr = 1\n",
    "[device]\nns_per_arith_instr = -1\nns_per_mem_instr = 1\n",
    "[device]\nns_per_arith_instr = 1\nns_per_mem_instr = 1\n[workgroup]\ndefault = 1x1\n",
])
def test_bad_configs(text):
    with pytest.raises(ValidationError):
        parse_config(text)
