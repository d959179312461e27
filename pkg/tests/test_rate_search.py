#!/usr/bin/env python3
# -*- coding: utf-8 -*-
from rarts.diagnostics import step_size_bounds
from rarts.rate_search import bin_search_rate, descends

from quadratic_examples import quadratic_hp, quadratic_start

obj, init = quadratic_start()
hp = quadratic_hp()
bounds = step_size_bounds(*obj.lipschitz, hp)

# ## Small rates descend, large ones do not

assert descends(obj, init, hp, 0.01)
assert descends(obj, init, hp, min(bounds.c1, bounds.c2, bounds.c3))
assert not descends(obj, init, hp, 0.5), "rate 0.5 must break descent for λ = β = 10"
print("Passed test 1 for descends in file test_rate_search.py")

# ## The search result is not smaller than the sufficient bounds

rate = bin_search_rate(obj, init, hp)
assert min(bounds.c1, bounds.c2, bounds.c3) <= rate < 1., f"rate {rate}"
assert descends(obj, init, hp, rate)
print("Passed test 2 for bin_search_rate in file test_rate_search.py")

try:
    bin_search_rate(obj, init, hp, low=0.5, high=1.)
    assert False, "bin_search_rate must fail if even `low` breaks descent"
except ValueError as e:
    assert "small enough" in str(e)
print("Passed test 3 for bin_search_rate in file test_rate_search.py")
