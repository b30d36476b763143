"""
Default parameters and the reference formation.

The reference formation has four levels of four cars behind the phantom
leader. The first car of every level (ids 1, 5, 9, 13) is the road boundary,
which runs along the right-hand side of the road.

"""

# Y gains
B = 0.4
K = 0.001

# X gains
B_X = 0.4
K_X = 0.001

# Spacing between consecutive levels and between cars within a level
G_Y = 50.0
G_X = 30.0

# Incoming weight sum of every non-root node
W = 1.0

# Viewing angles in degrees
AOV_Y = 120.0
AOV_X = 180.0
INFLUENCE_DEPTH = 1
MAX_PER_LEVEL = 4

# Angular margin keeping an existing edge while a car sits on a cone boundary
HYSTERESIS = 0.0

# Integration
DT = 0.1
T_END = 100.0

# Leader velocity along Y
V0 = 10.0

# Reference formation
LEVELS = 4
PER_LEVEL = 4
BOUNDARY_X = 90.0
HEAD_Y = 200.0

# Lateral templates, one entry per car 1..16 in multiples of g_x.
UNIFORM_TEMPLATE = [0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3]
NARROW_SECOND_TEMPLATE = [0, 1, 2, 3, 0, 1, 2, 3, 0, 0.5, 1, 1.5, 0, 1, 2, 3]
NARROW_ALTERNATE_TEMPLATE = [0, 1, 2, 3, 0, 0.5, 1, 1.5, 0, 1, 2, 3, 0, 0.5, 1, 1.5]

# Obstacle ids start past the formation so they never collide with car ids
OBSTACLE_BASE_ID = 100

# Tolerance below which a velocity deviation counts as converged
CONVERGENCE_TOLERANCE = 1e-3
