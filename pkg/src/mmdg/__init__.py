"""Moving-mesh symmetric interior penalty dG solver for 1D semi-linear PDEs
with traveling-wave solutions."""

from .mesh import PhysicalMesh, uniform_mesh, element_sizes
from .dg_space import DgSolution
from .problems import ProblemSpec, burgers, burgers_fisher, schlogl, get_problem
from .monitor import MonitorKind
from .driver import RunConfig, RunRecord, run, l2_error, energy, front_location

__version__ = "0.1.0"
