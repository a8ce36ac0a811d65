"""Constructive Fortin operator for lowest-order Taylor-Hood elements.

The package builds simplicial meshes, P0/P1/P2 spaces with sparse
assembly, the tangential edge bubbles and divergence correction, the
Scott-Zhang based Fortin operators for the Taylor-Hood and reduced velocity
spaces, and dense inf-sup and approximation diagnostics.
"""

from .analysis import (
    ConvergenceReport,
    DofCensus,
    InfSupReport,
    bubble_identity_residuals,
    convergence_study,
    divergence_residual,
    dof_census,
    fortin_check,
    fortin_norm_proxy,
    infsup_constant,
    octahedron_counterexample,
    sine_field,
    stream_field,
)
from .fem import (
    AnalyticField,
    DiscreteField,
    FunctionSpace,
    assemble,
    function_space,
    integrate_pairing,
)
from .fortin import (
    FortinOperator,
    apply_fortin,
    apply_pi2,
    bubble_matrix,
    fortin_operator,
    modified_bubble,
    normalized_bubble,
    scott_zhang,
)
from .mesh import (
    Mesh,
    MeshError,
    build_mesh,
    check_interior_node_assumption,
    freudenthal_cube,
    octahedron_basic,
    patch,
    read_mesh,
    write_mesh,
)
from .quadrature import QuadratureRule, quadrature_rule

__version__ = "0.1.0"
