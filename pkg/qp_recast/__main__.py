# qp_recast/__main__.py

from .cli import recast

recast(prog_name="qp_recast")
