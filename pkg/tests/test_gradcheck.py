"""Finite-difference checker: it must bless the real ops and catch a fake."""

import numpy as np

from poseattn.autodiff import Tensor
from poseattn.gradcheck import GradCheckEntry, GradCheckReport, grad_check, standard_checks


def test_grad_check_blesses_a_correct_op():
    rng = np.random.default_rng(0)
    x = Tensor(rng.uniform(-1, 1, (3, 4)), dtype=np.float64)
    report = grad_check(lambda: x.sigmoid(), [("x", x)])
    assert report.passed
    assert report.max_rel_error <= 1e-6


def test_grad_check_catches_doubled_backward():
    # an op whose backward claims twice the true Jacobian must fail the check
    def bad_scale(t: Tensor) -> Tensor:
        out = Tensor._from_op(t.data * 2.0, (t,))

        def _bw(g):
            t._accumulate(g * 4.0)  # true factor is 2

        out._backward = _bw
        return out

    rng = np.random.default_rng(1)
    x = Tensor(rng.uniform(0.5, 1.5, (2, 3)), dtype=np.float64)
    report = grad_check(lambda: bad_scale(x), [("x", x)])
    assert not report.passed
    assert report.max_rel_error > 0.1


def test_grad_check_subsamples_large_targets():
    rng = np.random.default_rng(2)
    x = Tensor(rng.uniform(-1, 1, 500), dtype=np.float64)
    report = grad_check(lambda: (x * x).sum(), [("x", x)], max_probes=50)
    assert report.entries[0].n_checked == 50
    assert report.passed


def test_entry_pass_threshold_is_inclusive():
    entry = GradCheckEntry("op", max_rel_error=1e-4, n_checked=10)
    assert entry.passed(1e-4)
    assert not entry.passed(9e-5)


def test_empty_report_trivially_passes():
    report = GradCheckReport(tolerance=1e-4)
    assert report.passed
    assert report.max_rel_error == 0.0


def test_standard_checks_cover_every_layer_and_pass():
    report = standard_checks()
    assert report.passed, [(e.name, e.max_rel_error) for e in report.entries]
    names = " ".join(e.name for e in report.entries)
    for needle in ("conv2d", "dense", "maxpool2", "global_avg_pool",
                   "channel_reduce max", "channel_reduce mean", "sigmoid", "relu",
                   "stack_channels", "broadcast_mul", "sam block",
                   "classifier plain", "classifier sam"):
        assert needle in names, f"missing coverage for {needle}"
    assert all(e.n_checked > 0 for e in report.entries)
