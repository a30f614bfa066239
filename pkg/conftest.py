"""
Shared pytest configuration: hypothesis profiles and the slow marker.

HYPOTHESIS_PROFILE picks the profile: "dev" for quick local runs, "default"
otherwise, "thorough" for the nightly run.
"""

import os

from hypothesis import HealthCheck, settings

settings.register_profile("dev", max_examples=100, deadline=None)
settings.register_profile("default", max_examples=1_000, deadline=None)
settings.register_profile(
    "thorough",
    max_examples=10_000,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long searches; deselect with -m 'not slow'")
