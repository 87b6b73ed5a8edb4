"""Plot scripts for the experiment harness output files.

Standalone consumers of the documented text formats: the results CSV
(fixed column prefix level,h,dof,l2_global,l2_local,h1,sV,sW,triple,
etaV,eta), the gamma-sweep CSV, and the mesh/field text snapshots.
Rendering is deterministic: same input file, same SVG bytes.
"""

__version__ = "0.1.0"
