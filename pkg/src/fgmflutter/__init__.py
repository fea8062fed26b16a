"""Supersonic flutter boundaries of thin cracked functionally graded plates."""

from .materials import (FgmPlate, MaterialPhase, SectionProperties, TemperatureCoefficients,
                        MATERIAL_PAIRS, SI3N4, SUS304, effective_properties, property_at,
                        section_properties, shear_correction, volume_fraction_ceramic)
from .mesh import DofMap, Mesh, apply_boundary, generate_structured
from .crack import (CrackData, CrackGeometry, CrackGeometryError, ElementCut, EnrichedDofMap,
                    build_enrichment_map, classify_elements, heaviside, level_sets,
                    subcell_quadrature, tip_branch)
from .fem import (AssemblyError, GlobalSystem, NondimScales, assemble,
                  assemble_damping_diagnostic, element_aero, element_mass, element_stiffness)
from .eigen import (ModalBasis, ReducedPencil, SolverError, complex_eigs, free_vibration,
                    mac_match, reduce_system)
from .flutter import (FlutterError, FlutterPoint, SweepConfig, SweepResult, nondimensionalize,
                      refine, solve_flutter, sweep, write_traces_csv)

__version__ = "0.1.0"
