"""Frozen constants for the soft (asymptotic) bounds.

Each value was measured once on the reference corpus used by the acceptance
suite and then rounded up with headroom.  The measured maxima are kept next
to each constant so a drift is easy to spot.
"""

# MergeStar: messages <= C_MSG * n * log2 n   (measured max 58)
C_MSG = 120
# MergeStar: bits <= C_BIT * n * (log2 n)^2   (measured max 140)
C_BIT = 300

# HybridWFT output depth <= C_DEPTH * log2 n  (measured max 1.0)
C_DEPTH = 1.5
# satisfactory trees: degree and depth <= C_SAT * log2 n  (measured max 3.43)
C_SAT = 4.0
# rounds <= C_ROUNDS_HYBRID * (log2 n)^2      (measured max 75)
C_ROUNDS_HYBRID = 120
# messages <= C_MSG_HYBRID * n * log2 n       (measured max 107)
C_MSG_HYBRID = 160
# max_v (sent+recv)/(deg_G(v)+log2 n)         (measured max 310)
C_NODE = 450
# per-phase messages <= C_PHASE_MSG * n        (measured max 55)
C_PHASE_MSG = 80

# RC2T iterations <= C_RC * log2 K            (measured max 5.2)
C_RC = 8
# deterministic pipeline depth <= ceil(log2 K) + PIPELINE_DEPTH_SLACK
PIPELINE_DEPTH_SLACK = 2

# expander: phases <= C_EXP_PHASES * log2 n   (measured: 1 phase)
C_EXP_PHASES = 2
# expander: messages <= C_EXP_MSG * n * (log2 n)^2   (measured max 0.54)
C_EXP_MSG = 2
# expander: per-round arrivals <= C_LOAD * ceil(log2 n / log2 log2 n)
C_LOAD = 6.0

# budgets
PHASE_FACTOR = 40       # max phases = PHASE_FACTOR * ceil(log2 n)
ROUND_CAP_FACTOR = 30   # HybridWFT rounds per phase <= ROUND_CAP_FACTOR * ceil(log2 n)
