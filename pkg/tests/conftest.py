"""Shared pytest configuration: a bounded hypothesis profile.

Property tests here are numerical, so per-example deadlines are noise;
example counts are kept modest to hold the whole suite under a few minutes.
"""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")
