import time

import hypothesis

hypothesis.settings.register_profile(
    "suite", derandomize=True, max_examples=60, deadline=None
)
hypothesis.settings.load_profile("suite")


def pytest_configure(config):
    config._suite_start_time = time.time()
