# Copyright 2026 Egostream Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
"""Streaming conversational target-speech extraction toolkit."""

try:
    from ._core import *  # noqa: F401,F403  (installed layout)
    from ._core import __version__  # noqa: F401
except ImportError:
    # Build-tree layout: the extension sits on sys.path by itself.
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
