import numpy as np
import pytest

from hdmimo.rates import ClusterCatalog

# four-BS example RB sets, zero-based BS and user ids
EXAMPLE_RBS = {
    1: {(0,): [0, 1], (1,): [2, 3], (2,): [4, 5], (3,): [6, 7]},
    2: {(0, 1): [0, 1, 2], (2, 3): [3, 4, 5]},
    3: {(0, 1): [0], (0, 2): [1], (0, 3): [2], (1, 2): [3], (1, 3): [4], (2, 3): [5]},
    4: {(0, 1): [0, 1, 2], (2,): [3, 4], (3,): [5, 6]},
}
EXAMPLE_BUDGETS = np.array([[2, 3]] * 4)


def two_bs_instance(seed=3):
    """2 BSs, 4 users, L_max=2: users 0/2 near BS 0, 1/3 near BS 1."""
    rng = np.random.default_rng(seed)
    table = {}
    for k in range(4):
        table[(k, (k % 2,))] = rng.uniform(1, 5)
        table[(k, (0, 1))] = rng.uniform(1, 5)
    return ClusterCatalog.from_rates(table, l_max=2), np.array([[2, 3], [2, 3]])


def random_catalog(rng, n_bs, n_users, l_max, rich=True, n_strongest=None):
    """Random peak rates over random candidate clusters."""
    from itertools import combinations

    table = {}
    for k in range(n_users):
        pool = sorted(rng.choice(n_bs, size=n_strongest or n_bs, replace=False).tolist())
        for L in range(1, l_max + 1):
            subsets = list(combinations(pool, L))
            if not rich:
                subsets = [tuple(pool[:L])]
            for C in subsets:
                table[(k, C)] = float(rng.uniform(0.5, 4.0) * (1 + 0.3 * (L - 1)))
    return ClusterCatalog.from_rates(table, l_max=l_max)


@pytest.fixture
def small():
    return two_bs_instance()


@pytest.fixture
def example_rbs():
    return EXAMPLE_RBS, EXAMPLE_BUDGETS


# acceptance verdict lines, echoed in the terminal summary
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
