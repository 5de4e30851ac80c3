"""Fast FD gradient spot checks per kernel (the full 100-case-per-kernel
sweep lives in the acceptance suite)."""

import pytest

import gradcheck


@pytest.mark.parametrize("kernel", sorted(gradcheck.KERNEL_CASES))
def test_kernel_gradients_spot(kernel):
    worst = gradcheck.run_kernel_suite(kernel, cases=8, seed=101)
    assert worst < 5e-3
