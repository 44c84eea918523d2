"""Figure regeneration from sigdec output files.

Thin consumers of the stable file formats (results CSV, fit-report JSON,
trace JSONL): every number rendered comes from an input file field, with
only axis/display transforms applied here.  No simulation code is
imported or reimplemented.
"""

__version__ = "0.1.0"
