"""Column indices for the flat arrays the compiled kernels operate on.

Characters are rows of ``ch``: players first (agent ids 0..P-1), boss last.
"""

# ch[i, *] per-character dynamic state and combat stats
X, Y, FACE, VX, VY = 0, 1, 2, 3, 4
HP, MAXHP, MP, MAXMP = 5, 6, 7, 8
ALIVE, MOVING = 9, 10
CSKILL, CREM, CTGT = 11, 12, 13  # casting skill (-1 idle), remaining sec, target
SPEED, SPOWER, APOWER = 14, 15, 16
ARMOR, EVASION, PARRY, CRIT, HASTE = 17, 18, 19, 20, 21
NSK = 22
N_CH = 23

# sk[i, k, *] static skill parameters
S_COOL, S_CAST, S_COST, S_RANGE, S_COEF, S_PSPEED = 0, 1, 2, 3, 4, 5
S_ONMOVE, S_ONCAST, S_CHARGES, S_ENEMY, S_ACTIVE, S_MELEE = 6, 7, 8, 9, 10, 11
N_SK = 12
MAX_SKILLS = 3

# proj[j, *] projectile slots
P_LIVE, P_SRC, P_TGT, P_X, P_Y, P_SPEED, P_SKILL, P_ORDER = 0, 1, 2, 3, 4, 5, 6, 7
N_PJ = 8
MAX_PROJ = 32

# meta[*]
M_TICK, M_DONE, M_WIN, M_PSEQ = 0, 1, 2, 3
N_META = 4

# cfg[*] static scenario constants
C_RADIUS, C_DT, C_MAXT, C_TURN, C_BACKHALF, C_NPLAYERS, C_BOSS, C_ORBIT, C_BAND = range(9)
N_CFG = 9

# ledger[i, *]
L_NORMAL, L_BACK, L_TAKEN = 0, 1, 2
N_LEDGER = 3

# action encoding
STAY, FORWARD, BACKWARD, TURN_RIGHT, TURN_LEFT, MOVE_LEFT, MOVE_RIGHT = range(7)
N_LOCOMOTION = 7
EXECUTE_BASE = 7

ACTION_NAMES = (
    "stay", "move_forward", "move_backward", "turn_right",
    "turn_left", "move_left", "move_right",
)

# event kinds
EV_MOVE, EV_CAST_START, EV_CAST_COMPLETE, EV_PROJECTILE_SPAWN = 0, 1, 2, 3
EV_HIT, EV_BACK_HIT, EV_DEATH, EV_EPISODE_END = 4, 5, 6, 7
EV_REJECTED, EV_CAST_CANCEL = 8, 9
EVENT_NAMES = (
    "move", "cast_start", "cast_complete", "projectile_spawn", "hit",
    "back_attack_hit", "death", "episode_end", "rejected_action", "cast_cancel",
)
N_EV = 6  # tick, kind, actor, target, v1, v2

# rejection reasons (v1 of a rejected_action event)
REJECT_REASONS = (
    "", "no_such_skill", "passive_skill", "on_cooldown", "casting",
    "moving", "out_of_mana", "no_target_in_range", "not_hostile",
)

# hit flags (v2 of a hit event)
F_EVADED, F_PARRIED, F_CRIT = 1, 2, 4

ORBIT_TICK, ORBIT_EPISODE = 0, 1
POLICY_STAY, POLICY_HEURISTIC, POLICY_RANDOM = 0, 1, 2
