"""Signal-exchange cellular-automaton decoder for the toric code.

A local decoder: each stabilizer site keeps a small classical memory
(defect bit, ballistic signal bits, stack counters) and the whole grid is
updated synchronously.  Defects attract each other through exchanged
signals and get matched by local Pauli corrections; stack-mediated
anti-signals erase stale signals so the memory relaxes back to zero.

Subpackages: ``lattice`` (toric geometry / homology), ``automaton`` (the
update rule), ``noise`` (phenomenological noise sampling), ``readout``
(exact matching for the final noiseless round), ``montecarlo`` (trial
running and statistics), ``analysis`` (fits), ``cli`` (command line and
file formats).
"""

__version__ = "0.1.0"
