"""Planted matching recovery: generators, exact MLE, posterior oracles, cycle finding, ODE asymptotics."""
