"""
From fractions to resource blocks
=================================

Turn activity fractions into an explicit per-RB schedule with the
virtual-queue greedy scheduler, then look at feasibility and pilots.
"""

import numpy as np

from hdmimo.num.problems import Allocation
from hdmimo.scheduler import pilot_dimensions, run_schedule, validate_rb, validate_schedule

# three BSs, each serving up to 3 users per RB in pair clusters; every pair
# has three users who each want half the RBs
x = {}
for i, C in enumerate([(0, 1), (0, 2), (1, 2)]):
    for k in range(3 * i, 3 * i + 3):
        x[(k, C, 2)] = 0.5
alloc = Allocation(x=x, lam={2: 1.0}, rates={key: 1.0 for key in x}, n_users=9)
B = np.array([[3, 3]] * 3)

# the targets meet every per-BS average budget, yet no single RB can load
# all three BSs to 3 users: any such RB would need 4.5 pair users
s = run_schedule(alloc, B, 10_000)
print("violations:", validate_schedule(s, B))
full = max(sum(len({k for C, us in rb.items() if j in C for k in us}) == 3 for j in range(3))
           for rb in s.sets)
print("most BSs fully loaded on one RB:", full)
print("realized share per user:", np.round([s.realized_fractions[key] for key in sorted(x)], 4))

# one uplink pilot per distinct user on an RB
t = next(t for t in range(s.horizon) if s.rb(t))
print(f"RB {t}:", s.rb(t), "->", pilot_dimensions(s.rb(t)), "pilots")

# hand-built RBs: mixing cluster sizes on one RB breaks the uniform rule
mixed = {(0, 1): [0, 1, 2], (2,): [3, 4], (3,): [5, 6]}
print(validate_rb(mixed, np.array([[2, 3]] * 4), "ucs"))
print(validate_rb(mixed, np.array([[2, 3]] * 4), "mcs"))
