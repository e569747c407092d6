# -*- coding: utf-8 -*-
#
# cavcoord documentation build configuration file
#
# This file is execfile()d with the current directory set to its
# containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import os
import sys
sys.path.insert(0, os.path.abspath('..'))

from recommonmark.parser import CommonMarkParser
source_parsers = {'.md': CommonMarkParser,}

from unittest.mock import MagicMock

class Mock(MagicMock):
    @classmethod
    def __getattr__(cls, name):
            return MagicMock()

#Heavy dependencies are not needed to render argparse and autodoc pages
MOCK_MODULES = ['numpy', 'scipy', 'scipy.optimize', 'pandas', 'yaml']
sys.modules.update((mod_name, Mock()) for mod_name in MOCK_MODULES)


# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
    'sphinx.ext.napoleon',
    'sphinxarg.ext'
]

on_rtd = os.environ.get('READTHEDOCS', None) == 'True'

templates_path = ['_templates']

source_suffix = ['.rst', '.md']

master_doc = 'index'

project = u'cavcoord'
copyright = u'2026, cavcoord developers'
author = u'cavcoord developers'

version = u'0.1.0'
release = u'0.1.0'

language = None

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

pygments_style = 'sphinx'


# -- Options for HTML output ----------------------------------------------

if on_rtd:
    html_theme = 'default'
else:
    import sphinx_rtd_theme
    html_theme = 'sphinx_rtd_theme'
    html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]

html_static_path = ['_static']

htmlhelp_basename = 'cavcoorddoc'
