from __future__ import annotations

from hypothesis import settings

# fixed example sequence so that runs are reproducible
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")
