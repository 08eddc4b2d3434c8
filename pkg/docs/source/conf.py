# -*- coding: utf-8 -*-
#
# ndecon documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

sys.path.insert(0, os.path.abspath("../../"))

import ndecon

# General information about the project.
project = "ndecon"
copyright = "2026, the ndecon developers"
author = "the ndecon developers"

# The short X.Y version and the full version.
version = ".".join(ndecon.__version__.split(".")[:2])
release = ndecon.__version__

# -- General configuration ------------------------------------------------

extensions = [
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx.ext.todo",
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.githubpages",
    "sphinx.ext.mathjax",
]

# Add any paths that contain templates here, relative to this directory.
templates_path = ["_templates"]

source_suffix = ".rst"

# The master toctree document.
master_doc = "index"

language = "en"

exclude_patterns = []

# The name of the Pygments (syntax highlighting) style to use.
pygments_style = "sphinx"

todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = "sphinxdoc"

html_static_path = ["_static"]

htmlhelp_basename = "ndecondoc"

# -- Options for LaTeX output ---------------------------------------------

latex_documents = [
    (master_doc, "ndecon.tex", "ndecon Documentation", author, "manual"),
]

# -- Options for manual page output ---------------------------------------

man_pages = [(master_doc, "ndecon", "ndecon Documentation", [author], 1)]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
}

autoclass_content = "both"
autodoc_member_order = "bysource"
