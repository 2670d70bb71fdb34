# Copyright 2026 Egostream Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
"""Resolves the package from the build tree when it is not installed."""

import os
import sys

_build = os.environ.get("EGOSTREAM_BUILD_DIR")
_src = os.environ.get("EGOSTREAM_SRC_DIR")
if _src:
    _pkg = os.path.join(_src, "python")
    if _pkg not in sys.path:
        sys.path.insert(0, _pkg)
if _build and _build not in sys.path:
    sys.path.insert(0, _build)
