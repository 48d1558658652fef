"""Sphinx settings for the hybridrag documentation."""
import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join("..", "..")))

from hybridrag import __version__  # noqa: E402

project = "hybridrag"
author = "hybridrag developers"
copyright = f"2025, {author}"
release = __version__
version = ".".join(release.split(".")[:2])

extensions = ["sphinx.ext.autodoc", "sphinx.ext.napoleon"]
autodoc_member_order = "bysource"
autodoc_typehints = "description"

exclude_patterns = ["_build"]

html_theme = "furo"
html_title = f"hybridrag {release}"
