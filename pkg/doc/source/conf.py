# Sphinx configuration for the ec3py documentation.

import os
import sys
from datetime import datetime

sys.path.insert(0, os.path.abspath('../../'))

import ec3py
import sphinx_bootstrap_theme

project = 'ec3py'
author = 'The ec3py developers'
copyright = f'{datetime.now().year}, {author}'
version = ec3py.__version__
release = version

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
]

# docstrings are numpydoc style
napoleon_google_docstring = False
napoleon_numpy_docstring = True
autodoc_member_order = 'bysource'

master_doc = 'index'
exclude_patterns = []
pygments_style = 'sphinx'

html_theme = 'bootstrap'
html_theme_path = sphinx_bootstrap_theme.get_html_theme_path()
html_theme_options = dict(
    bootswatch_theme="readable",
    navbar_title="ec3py",
    navbar_sidebarrel=False,
    globaltoc_depth=2,
    body_max_width="none"
)
html_show_sourcelink = False

intersphinx_mapping = {
    "python": ("https://docs.python.org/3/", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "astropy": ("https://docs.astropy.org/en/stable/", None),
    "matplotlib": ("https://matplotlib.org/stable/", None),
}
