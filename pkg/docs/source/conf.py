#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# labeldenoise documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath('../..'))

extensions = ['sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.viewcode',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
]

intersphinx_mapping = {'python': ('https://docs.python.org/3', None),
                       'numpy': ('https://numpy.org/doc/stable', None),
                       'scipy': ('https://docs.scipy.org/doc/scipy', None)}

autodoc_member_order = 'bysource'

source_suffix = '.rst'
master_doc = 'index'

project = u'labeldenoise'
copyright = u'2026, labeldenoise developers'
author = u'labeldenoise developers'

version = u'0.1'
release = u'0.1.0'

exclude_patterns = []
pygments_style = 'sphinx'

html_theme = 'alabaster'
html_sidebars = {'**': ['globaltoc.html', 'relations.html', 'sourcelink.html', 'searchbox.html']}
htmlhelp_basename = 'labeldenoisedoc'

man_pages = [
    (master_doc, 'labeldenoise', u'labeldenoise Documentation', [author], 1)
]
