import math

import pytest
import torch

from robustmvc.ddc import (
    AssignmentHead,
    KernelConfig,
    KernelWarning,
    ddc_loss,
    ddc_terms,
    kernel_matrix,
    kernel_sigma2,
    simplex_corner_affinity,
)
from robustmvc.errors import ArgumentError
from robustmvc.gradcheck import check_gradient

D = torch.float64


def _brute_ddc(G, E):
    """Scalar re-implementation summing every term of the structural loss."""
    N, K = len(G), len(G[0])
    col = lambda A, k: [A[i][k] for i in range(N)]  # noqa: E731
    quad = lambda a, b: sum(a[i] * E[i][j] * b[j] for i in range(N) for j in range(N))  # noqa: E731

    def cs(A):
        s = 0.0
        for i in range(K - 1):
            for j in range(i + 1, K):
                ai, aj = col(A, i), col(A, j)
                s += quad(ai, aj) / math.sqrt(quad(ai, ai) * quad(aj, aj))
        return s / (K * (K - 1))

    B = [[math.exp(-sum((G[a][k] - (1.0 if k == b else 0.0)) ** 2 for k in range(K))) for b in range(K)]
         for a in range(N)]
    triu = sum(G[n][i] * G[n][j] for n in range(N) for i in range(K) for j in range(i + 1, K))
    return cs(G), triu, cs(B)


class TestKernel:
    def test_identical_rows(self):
        H = torch.tensor([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]], dtype=D)
        assert kernel_matrix(H, sigma2=1.0)[0, 1] == 1

    def test_bandwidth_arithmetic(self):
        sigma = 0.7
        H = torch.tensor([[0.0, 0.0], [math.sqrt(2) * sigma, 0.0]], dtype=D)
        assert kernel_matrix(H, sigma2=sigma ** 2)[0, 1].item() == pytest.approx(math.exp(-1))

    def test_symmetric_unit_diagonal(self):
        H = torch.randn(12, 4, dtype=D)
        E = kernel_matrix(H, KernelConfig())
        assert torch.equal(E, E.T)
        assert torch.all(torch.diagonal(E) == 1)
        assert torch.all((E > 0) & (E <= 1))

    def test_relative_median_rule(self):
        H = torch.tensor([[0.0], [1.0], [3.0]], dtype=D)
        # squared distances 1, 9, 4 -> median 4
        assert kernel_sigma2(H, KernelConfig(rel=0.5)) == pytest.approx(2.0)
        assert kernel_sigma2(H, KernelConfig(sigma_rule="fixed", fixed_sigma=3.0)) == pytest.approx(9.0)

    def test_constant_rows_fallback(self):
        with pytest.warns(KernelWarning):
            E = kernel_matrix(torch.ones(4, 2, dtype=D), KernelConfig())
        assert torch.all(E == 1)

    def test_config_validation(self):
        with pytest.raises(ArgumentError):
            KernelConfig(rel=0)
        with pytest.raises(ArgumentError):
            KernelConfig(sigma_rule="fixed")


class TestCorners:
    def test_at_corner(self):
        B = simplex_corner_affinity(torch.tensor([[0.0, 1.0, 0.0]], dtype=D))
        assert B[0, 1] == 1

    def test_midpoint(self):
        B = simplex_corner_affinity(torch.tensor([[0.5, 0.5]], dtype=D))
        torch.testing.assert_close(B, torch.full((1, 2), math.exp(-0.5), dtype=D))

    def test_range(self):
        G = torch.softmax(torch.randn(10, 4, dtype=D), 1)
        B = simplex_corner_affinity(G)
        assert torch.all((B > 0) & (B <= 1))


class TestDDCLoss:
    def test_separated_hard_assignments(self):
        G = torch.tensor([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=D)
        E = torch.block_diag(torch.ones(2, 2, dtype=D), torch.ones(2, 2, dtype=D))
        t1, t2, _ = ddc_terms(G, E)
        assert t1.item() == 0 and t2.item() == 0

    @pytest.mark.parametrize("n, k", [(4, 2), (6, 3), (10, 5)])
    def test_uniform_orthogonality_term(self, n, k):
        # every entry of G'G is n / k^2 and there are k(k-1)/2 strict upper entries
        G = torch.full((n, k), 1.0 / k, dtype=D)
        _, t2, _ = ddc_terms(G, torch.eye(n, dtype=D))
        assert t2.item() == pytest.approx(n * (k - 1) / (2 * k))
        _, t2n, _ = ddc_terms(G, torch.eye(n, dtype=D), normalize_triu=True)
        assert t2n.item() == pytest.approx((k - 1) / (2 * k))

    def test_brute_force_oracle(self):
        g = torch.Generator().manual_seed(0)
        for _ in range(5):
            G = torch.softmax(torch.randn(5, 3, generator=g, dtype=D), 1)
            E = kernel_matrix(torch.randn(5, 2, generator=g, dtype=D), KernelConfig())
            terms = [t.item() for t in ddc_terms(G, E)]
            assert terms == pytest.approx(list(_brute_ddc(G.tolist(), E.tolist())), rel=1e-12)
            assert ddc_loss(G, E).item() == pytest.approx(sum(terms), rel=1e-12)

    def test_term_ranges(self):
        g = torch.Generator().manual_seed(1)
        for _ in range(20):
            G = torch.softmax(3 * torch.randn(8, 4, generator=g, dtype=D), 1)
            E = kernel_matrix(torch.randn(8, 3, generator=g, dtype=D), KernelConfig())
            t1, t2, t3 = ddc_terms(G, E)
            # each of the K(K-1)/2 ratios is in [0, 1], divided by K(K-1)
            assert 0 <= t1 <= 0.5 and 0 <= t3 <= 0.5 and t2 >= 0

    def test_cluster_permutation_invariance(self):
        g = torch.Generator().manual_seed(2)
        G = torch.softmax(torch.randn(7, 4, generator=g, dtype=D), 1)
        E = kernel_matrix(torch.randn(7, 3, generator=g, dtype=D), KernelConfig())
        perm = torch.tensor([2, 0, 3, 1])
        assert ddc_loss(G[:, perm], E).item() == pytest.approx(ddc_loss(G, E).item(), rel=1e-12)

    def test_needs_two_clusters(self):
        with pytest.raises(ArgumentError):
            ddc_loss(torch.ones(3, 1, dtype=D), torch.eye(3, dtype=D))

    def test_gradient_through_head_inputs_and_kernel(self):
        g = torch.Generator().manual_seed(3)
        head = AssignmentHead(3, 3, hidden=5).double().eval()
        H = torch.randn(6, 3, generator=g, dtype=D)
        sigma2 = kernel_sigma2(H, KernelConfig())

        def loss(h):
            return ddc_loss(head(h), kernel_matrix(h, sigma2=sigma2))

        assert check_gradient(loss, H) < 1e-4


def test_assignment_head_rows_stochastic():
    head = AssignmentHead(4, 3).eval()
    G = head(torch.randn(10, 4))
    torch.testing.assert_close(G.sum(1), torch.ones(10), atol=1e-6, rtol=0)
    assert torch.all(G >= 0)
