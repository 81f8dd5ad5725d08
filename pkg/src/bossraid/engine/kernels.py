"""Compiled simulation kernels.

Everything that advances an episode lives here so the per-tick Python API and
the batch win-rate runner execute literally the same code. Kernels mutate the
arrays they are given; the Python layer decides when to copy.
"""

import math

import numpy as np
from numba import njit

from ..rng import mix64, next_below, next_uniform
from .layout import (
    ALIVE, APOWER, ARMOR, BACKWARD, C_BACKHALF, C_BAND, C_BOSS, C_DT, C_MAXT,
    C_NPLAYERS, C_ORBIT, C_RADIUS, C_TURN, CREM, CRIT, CSKILL, CTGT, EV_BACK_HIT,
    EV_CAST_CANCEL, EV_CAST_COMPLETE, EV_CAST_START, EV_DEATH, EV_EPISODE_END,
    EV_HIT, EV_MOVE, EV_PROJECTILE_SPAWN, EV_REJECTED, EVASION, EXECUTE_BASE,
    F_CRIT, F_EVADED, F_PARRIED, FACE, FORWARD, HASTE, HP, L_BACK, L_NORMAL,
    L_TAKEN, M_DONE, M_PSEQ, M_TICK, M_WIN, MAX_PROJ, MAX_SKILLS, MOVE_LEFT,
    MOVE_RIGHT, MOVING, MP, N_CH, N_EV, N_LEDGER, N_META, N_PJ, N_SK, NSK,
    ORBIT_TICK, P_LIVE, P_ORDER, P_SKILL, P_SPEED, P_SRC, P_TGT, P_X, P_Y,
    PARRY, POLICY_HEURISTIC, POLICY_RANDOM, S_ACTIVE, S_CAST, S_CHARGES,
    S_COEF, S_COOL, S_COST, S_ENEMY, S_MELEE, S_ONCAST, S_ONMOVE, S_PSPEED,
    S_RANGE, SPEED, SPOWER, STAY, TURN_LEFT, TURN_RIGHT, VX, VY, X, Y,
)

EPS = 1e-9
TWO_PI = 2.0 * math.pi
_ORBIT_SALT = np.uint64(0xD1B54A32D192ED03)


@njit(cache=True)
def wrap_angle(a):
    """Map an angle to (-pi, pi]."""
    while a > math.pi:
        a -= TWO_PI
    while a <= -math.pi:
        a += TWO_PI
    return a


@njit(cache=True)
def is_back_kernel(ax, ay, bx, by, bface, half_angle):
    dx = ax - bx
    dy = ay - by
    if dx == 0.0 and dy == 0.0:
        return False
    off = wrap_angle(math.atan2(dy, dx) - (bface + math.pi))
    return abs(off) <= half_angle + EPS


@njit(cache=True)
def roll_damage(power, coef, crit, armor, evasion, parry, rng):
    """Returns (damage, flags). Always consumes three draws: evasion, parry, crit."""
    u_eva = next_uniform(rng)
    u_par = next_uniform(rng)
    u_crit = next_uniform(rng)
    if u_eva < evasion / 100.0:
        return 0.0, F_EVADED
    if u_par < parry / 100.0:
        return 0.0, F_PARRIED
    flags = 0
    base = coef * power
    if u_crit < crit / 100.0:
        base *= 2.0
        flags |= F_CRIT
    base *= 1.0 - armor / 100.0
    # whole hit points keep the damage ledger exactly summable
    return math.floor(base + 0.5), flags


@njit(cache=True)
def _emit(ev, ne, log, tick, kind, actor, target, v1, v2):
    if log:
        ev[ne, 0] = tick
        ev[ne, 1] = kind
        ev[ne, 2] = actor
        ev[ne, 3] = target
        ev[ne, 4] = v1
        ev[ne, 5] = v2
        return ne + 1
    return ne


@njit(cache=True)
def nearest_player(ch, n_players, x, y):
    best = -1
    best_d = np.inf
    for i in range(n_players):
        if ch[i, ALIVE] == 0:
            continue
        d = math.hypot(ch[i, X] - x, ch[i, Y] - y)
        if d < best_d:
            best_d = d
            best = i
    return best


@njit(cache=True)
def _haste_factor(ch, i):
    return 1.0 + ch[i, HASTE] / 100.0


@njit(cache=True)
def cast_check(ch, sk, charges, i, k, tgt):
    """0 if character ``i`` may start skill ``k`` on ``tgt`` now, else a reason code."""
    if k < 0 or k >= ch[i, NSK]:
        return 1
    if sk[i, k, S_ACTIVE] == 0:
        return 2
    if charges[i, k] < 1:
        return 3
    if ch[i, CSKILL] >= 0 and sk[i, k, S_ONCAST] == 0:
        return 4
    if ch[i, MOVING] != 0 and sk[i, k, S_ONMOVE] == 0:
        return 5
    if ch[i, MP] < sk[i, k, S_COST]:
        return 6
    if tgt < 0 or ch[tgt, ALIVE] == 0:
        return 7
    if math.hypot(ch[tgt, X] - ch[i, X], ch[tgt, Y] - ch[i, Y]) > sk[i, k, S_RANGE]:
        return 7
    if sk[i, k, S_ENEMY] == 0:
        return 8
    return 0


@njit(cache=True)
def _kill(ch, i):
    ch[i, HP] = 0.0
    ch[i, ALIVE] = 0.0
    ch[i, CSKILL] = -1.0
    ch[i, CREM] = 0.0
    ch[i, CTGT] = -1.0
    ch[i, MOVING] = 0.0
    ch[i, VX] = 0.0
    ch[i, VY] = 0.0


@njit(cache=True)
def resolve_hit(cfg, ch, sk, ledger, rng, ev, ne, log, tick, src, k, tgt):
    if ch[tgt, ALIVE] == 0:
        return ne
    boss = int(cfg[C_BOSS])
    power = ch[src, APOWER] if sk[src, k, S_MELEE] != 0 else ch[src, SPOWER]
    dmg, flags = roll_damage(
        power, sk[src, k, S_COEF], ch[src, CRIT],
        ch[tgt, ARMOR], ch[tgt, EVASION], ch[tgt, PARRY], rng,
    )
    hp = ch[tgt, HP]
    applied = dmg if dmg < hp else hp
    ch[tgt, HP] = hp - applied
    back = False
    if tgt == boss and src != boss:
        back = is_back_kernel(ch[src, X], ch[src, Y], ch[boss, X], ch[boss, Y],
                              ch[boss, FACE], cfg[C_BACKHALF])
    if back:
        ledger[src, L_BACK] += applied
        ne = _emit(ev, ne, log, tick, EV_BACK_HIT, src, tgt, applied, flags)
    else:
        ledger[src, L_NORMAL] += applied
        ne = _emit(ev, ne, log, tick, EV_HIT, src, tgt, applied, flags)
    ledger[tgt, L_TAKEN] += applied
    if ch[tgt, HP] <= 0.0:
        _kill(ch, tgt)
        ne = _emit(ev, ne, log, tick, EV_DEATH, tgt, src, 0.0, 0.0)
    return ne


@njit(cache=True)
def step_kernel(cfg, ch, sk, cool, charges, proj, meta, rng, ledger, actions, ev, log):
    """Advance one tick. Returns the number of events written to ``ev``.

    Phase order: cooldown recovery, actions (cast starts, turns, moves),
    projectile flight, cast completion, termination.
    """
    if meta[M_DONE] != 0:
        return 0
    n = ch.shape[0]
    n_players = int(cfg[C_NPLAYERS])
    boss = int(cfg[C_BOSS])
    dt = cfg[C_DT]
    radius = cfg[C_RADIUS]
    turn = cfg[C_TURN]
    tick = meta[M_TICK] + 1.0
    ne = 0

    for i in range(n):
        if ch[i, ALIVE] == 0:
            continue
        hf = _haste_factor(ch, i)
        for k in range(int(ch[i, NSK])):
            if cool[i, k] > 0.0:
                c = cool[i, k] - dt
                if c <= EPS:
                    charges[i, k] += 1.0
                    if charges[i, k] < sk[i, k, S_CHARGES]:
                        cool[i, k] = sk[i, k, S_COOL] / hf
                    else:
                        cool[i, k] = 0.0
                else:
                    cool[i, k] = c

    for i in range(n):
        if ch[i, ALIVE] == 0:
            ch[i, MOVING] = 0.0
            ch[i, VX] = 0.0
            ch[i, VY] = 0.0
            continue
        a = actions[i]
        ch[i, VX] = 0.0
        ch[i, VY] = 0.0
        translated = False
        if a >= EXECUTE_BASE or a < 0:
            k = a - EXECUTE_BASE
            if i == boss:
                tgt = nearest_player(ch, n_players, ch[i, X], ch[i, Y])
            else:
                tgt = boss
            reason = 1 if a < 0 else cast_check(ch, sk, charges, i, k, tgt)
            if reason != 0:
                ne = _emit(ev, ne, log, tick, EV_REJECTED, i, -1, reason, k)
            else:
                if ch[i, CSKILL] >= 0:
                    ne = _emit(ev, ne, log, tick, EV_CAST_CANCEL, i, ch[i, CTGT], ch[i, CSKILL], 0.0)
                ch[i, CSKILL] = k
                ch[i, CREM] = sk[i, k, S_CAST] / _haste_factor(ch, i)
                ch[i, CTGT] = tgt
                ne = _emit(ev, ne, log, tick, EV_CAST_START, i, tgt, k, ch[i, CREM])
        elif a == TURN_RIGHT:
            ch[i, FACE] = wrap_angle(ch[i, FACE] - turn)
        elif a == TURN_LEFT:
            ch[i, FACE] = wrap_angle(ch[i, FACE] + turn)
        elif a != STAY:
            ang = ch[i, FACE]
            if a == BACKWARD:
                ang += math.pi
            elif a == MOVE_LEFT:
                ang += 0.5 * math.pi
            elif a == MOVE_RIGHT:
                ang -= 0.5 * math.pi
            dist = ch[i, SPEED] * dt
            ox = ch[i, X]
            oy = ch[i, Y]
            nx = ox + math.cos(ang) * dist
            ny = oy + math.sin(ang) * dist
            r = math.hypot(nx, ny)
            if r > radius:
                nx *= radius / r
                ny *= radius / r
            ch[i, X] = nx
            ch[i, Y] = ny
            ch[i, VX] = (nx - ox) / dt
            ch[i, VY] = (ny - oy) / dt
            translated = True
            ne = _emit(ev, ne, log, tick, EV_MOVE, i, -1, nx, ny)
            if ch[i, CSKILL] >= 0 and sk[i, int(ch[i, CSKILL]), S_ONMOVE] == 0:
                ne = _emit(ev, ne, log, tick, EV_CAST_CANCEL, i, ch[i, CTGT], ch[i, CSKILL], 1.0)
                ch[i, CSKILL] = -1.0
                ch[i, CREM] = 0.0
                ch[i, CTGT] = -1.0
        ch[i, MOVING] = 1.0 if translated else 0.0

    for j in range(MAX_PROJ):
        if proj[j, P_LIVE] == 0:
            continue
        s = int(proj[j, P_SRC])
        t = int(proj[j, P_TGT])
        if ch[s, ALIVE] == 0 or ch[t, ALIVE] == 0:
            proj[j, P_LIVE] = 0.0
            continue
        dx = ch[t, X] - proj[j, P_X]
        dy = ch[t, Y] - proj[j, P_Y]
        d = math.hypot(dx, dy)
        reach = proj[j, P_SPEED] * dt
        if d <= reach:
            proj[j, P_LIVE] = 0.0
            proj[j, P_X] = ch[t, X]
            proj[j, P_Y] = ch[t, Y]
            ne = resolve_hit(cfg, ch, sk, ledger, rng, ev, ne, log, tick, s, int(proj[j, P_SKILL]), t)
        else:
            proj[j, P_X] += dx / d * reach
            proj[j, P_Y] += dy / d * reach

    for i in range(n):
        if ch[i, ALIVE] == 0 or ch[i, CSKILL] < 0:
            continue
        ch[i, CREM] -= dt
        if ch[i, CREM] > EPS:
            continue
        k = int(ch[i, CSKILL])
        t = int(ch[i, CTGT])
        ch[i, CSKILL] = -1.0
        ch[i, CREM] = 0.0
        ch[i, CTGT] = -1.0
        if t < 0 or ch[t, ALIVE] == 0 or ch[i, MP] < sk[i, k, S_COST]:
            ne = _emit(ev, ne, log, tick, EV_CAST_CANCEL, i, t, k, 2.0)
            continue
        ch[i, MP] -= sk[i, k, S_COST]
        charges[i, k] -= 1.0
        if cool[i, k] <= 0.0:
            cd = sk[i, k, S_COOL] / _haste_factor(ch, i)
            if cd > 0.0:
                cool[i, k] = cd
            else:
                charges[i, k] += 1.0
        ne = _emit(ev, ne, log, tick, EV_CAST_COMPLETE, i, t, k, 0.0)
        if sk[i, k, S_PSPEED] <= 0.0:
            ne = resolve_hit(cfg, ch, sk, ledger, rng, ev, ne, log, tick, i, k, t)
            continue
        slot = -1
        for j in range(MAX_PROJ):
            if proj[j, P_LIVE] == 0:
                slot = j
                break
        if slot < 0:
            # all slots in flight: resolve immediately rather than drop the cast
            ne = resolve_hit(cfg, ch, sk, ledger, rng, ev, ne, log, tick, i, k, t)
            continue
        proj[slot, P_LIVE] = 1.0
        proj[slot, P_SRC] = i
        proj[slot, P_TGT] = t
        proj[slot, P_X] = ch[i, X]
        proj[slot, P_Y] = ch[i, Y]
        proj[slot, P_SPEED] = sk[i, k, S_PSPEED]
        proj[slot, P_SKILL] = k
        proj[slot, P_ORDER] = meta[M_PSEQ]
        meta[M_PSEQ] += 1.0
        ne = _emit(ev, ne, log, tick, EV_PROJECTILE_SPAWN, i, t, slot, proj[slot, P_ORDER])

    meta[M_TICK] = tick
    boss_dead = ch[boss, ALIVE] == 0
    players_dead = True
    for i in range(n_players):
        if ch[i, ALIVE] != 0:
            players_dead = False
            break
    if boss_dead or players_dead or tick >= cfg[C_MAXT]:
        meta[M_DONE] = 1.0
        meta[M_WIN] = 1.0 if boss_dead else 0.0
        ne = _emit(ev, ne, log, tick, EV_EPISODE_END, -1, -1, meta[M_WIN], tick)
    return ne


@njit(cache=True)
def _turn_toward(diff, tol):
    if diff > tol:
        return TURN_LEFT
    if diff < -tol:
        return TURN_RIGHT
    return -1


@njit(cache=True)
def boss_policy_kernel(cfg, ch, sk, charges):
    """Nearest living player is the target; fire the longest-range ready skill
    that reaches it, otherwise face it and close in until it is within reach
    of the shortest-range skill."""
    boss = int(cfg[C_BOSS])
    if ch[boss, ALIVE] == 0 or ch[boss, CSKILL] >= 0:
        return STAY
    bx = ch[boss, X]
    by = ch[boss, Y]
    t = nearest_player(ch, int(cfg[C_NPLAYERS]), bx, by)
    if t < 0:
        return STAY
    d = math.hypot(ch[t, X] - bx, ch[t, Y] - by)
    best = -1
    best_range = -1.0
    shortest = np.inf
    for k in range(int(ch[boss, NSK])):
        if sk[boss, k, S_ACTIVE] == 0 or sk[boss, k, S_ENEMY] == 0:
            continue
        r = sk[boss, k, S_RANGE]
        if r < shortest:
            shortest = r
        if charges[boss, k] >= 1 and d <= r and ch[boss, MP] >= sk[boss, k, S_COST] and r > best_range:
            best = k
            best_range = r
    if best >= 0:
        return EXECUTE_BASE + best
    diff = wrap_angle(math.atan2(ch[t, Y] - by, ch[t, X] - bx) - ch[boss, FACE])
    turn = _turn_toward(diff, cfg[C_TURN])
    if turn >= 0:
        return turn
    if d > shortest:
        return FORWARD
    return STAY


@njit(cache=True)
def _hr_candidate(ch, sk, charges, i, k, d):
    return (sk[i, k, S_ACTIVE] != 0 and sk[i, k, S_ENEMY] != 0 and charges[i, k] >= 1
            and d < sk[i, k, S_RANGE] and ch[i, MP] >= sk[i, k, S_COST])


@njit(cache=True)
def pt_hr_kernel(cfg, ch, sk, charges, i, rng):
    """Heuristic playtester: hold maximum skill range, drift around the boss,
    fire whenever in range while standing still and not casting."""
    boss = int(cfg[C_BOSS])
    if ch[i, ALIVE] == 0 or ch[boss, ALIVE] == 0:
        return STAY
    dx = ch[boss, X] - ch[i, X]
    dy = ch[boss, Y] - ch[i, Y]
    d = math.hypot(dx, dy)
    if cfg[C_ORBIT] == ORBIT_TICK:
        clockwise = next_below(rng, 2) == 0
    else:
        clockwise = (mix64(rng[0] ^ (np.uint64(i + 1) * _ORBIT_SALT)) & np.uint64(1)) == np.uint64(0)
    diff = wrap_angle(math.atan2(dy, dx) - ch[i, FACE])
    tol = cfg[C_TURN]
    casting = ch[i, CSKILL] >= 0
    if casting and sk[i, int(ch[i, CSKILL]), S_ONMOVE] == 0:
        turn = _turn_toward(diff, tol)
        return turn if turn >= 0 else STAY

    n_sk = int(ch[i, NSK])
    rmax = 0.0
    n_cand = 0
    for k in range(n_sk):
        if sk[i, k, S_ACTIVE] == 0 or sk[i, k, S_ENEMY] == 0:
            continue
        if sk[i, k, S_RANGE] > rmax:
            rmax = sk[i, k, S_RANGE]
        if _hr_candidate(ch, sk, charges, i, k, d):
            n_cand += 1
    if n_cand > 0 and not casting:
        if ch[i, MOVING] != 0:
            return STAY
        m = 0 if n_cand == 1 else next_below(rng, n_cand)
        for k in range(n_sk):
            if _hr_candidate(ch, sk, charges, i, k, d):
                if m == 0:
                    return EXECUTE_BASE + k
                m -= 1

    turn = _turn_toward(diff, tol)
    if turn >= 0:
        return turn
    if d < rmax - cfg[C_BAND]:
        return BACKWARD
    if d >= rmax:
        return FORWARD
    return MOVE_LEFT if clockwise else MOVE_RIGHT


@njit(cache=True)
def init_kernel(tmpl_ch, tmpl_sk, samp_cols, samp_vals, samp_lens, n_players,
                ch, sk, cool, charges, proj, meta, rng, ledger):
    ch[:, :] = tmpl_ch
    sk[:, :, :] = tmpl_sk
    for j in range(samp_cols.shape[0]):
        v = samp_vals[j, next_below(rng, samp_lens[j])]
        col = samp_cols[j]
        for i in range(n_players):
            for k in range(int(ch[i, NSK])):
                sk[i, k, col] = v
    cool[:, :] = 0.0
    for i in range(ch.shape[0]):
        for k in range(MAX_SKILLS):
            charges[i, k] = sk[i, k, S_CHARGES] if k < ch[i, NSK] else 0.0
    proj[:, :] = 0.0
    meta[:] = 0.0
    ledger[:, :] = 0.0


@njit(cache=True)
def play_episodes(cfg, tmpl_ch, tmpl_sk, samp_cols, samp_vals, samp_lens, keys,
                  policy, occ, wins, ticks, boss_hp):
    """Run one episode per key with a built-in team policy, no event logging.

    ``occ`` (res x res, may be 0x0) accumulates living-player ticks per cell.
    """
    n = tmpl_ch.shape[0]
    n_players = int(cfg[C_NPLAYERS])
    boss = int(cfg[C_BOSS])
    radius = cfg[C_RADIUS]
    res = occ.shape[0]
    ch = np.empty((n, N_CH))
    sk = np.empty((n, MAX_SKILLS, N_SK))
    cool = np.zeros((n, MAX_SKILLS))
    charges = np.zeros((n, MAX_SKILLS))
    proj = np.zeros((MAX_PROJ, N_PJ))
    meta = np.zeros(N_META)
    ledger = np.zeros((n, N_LEDGER))
    rng = np.zeros(2, dtype=np.uint64)
    actions = np.zeros(n, dtype=np.int64)
    ev = np.zeros((1, N_EV))
    for e in range(keys.shape[0]):
        rng[0] = keys[e]
        rng[1] = np.uint64(0)
        init_kernel(tmpl_ch, tmpl_sk, samp_cols, samp_vals, samp_lens, n_players,
                    ch, sk, cool, charges, proj, meta, rng, ledger)
        while meta[M_DONE] == 0:
            for i in range(n_players):
                if ch[i, ALIVE] == 0:
                    actions[i] = STAY
                elif policy == POLICY_HEURISTIC:
                    actions[i] = pt_hr_kernel(cfg, ch, sk, charges, i, rng)
                elif policy == POLICY_RANDOM:
                    actions[i] = next_below(rng, EXECUTE_BASE + int(ch[i, NSK]))
                else:
                    actions[i] = STAY
            actions[boss] = boss_policy_kernel(cfg, ch, sk, charges)
            step_kernel(cfg, ch, sk, cool, charges, proj, meta, rng, ledger, actions, ev, False)
            if res > 0:
                for i in range(n_players):
                    if ch[i, ALIVE] != 0:
                        cx = int((ch[i, X] + radius) / (2.0 * radius) * res)
                        cy = int((ch[i, Y] + radius) / (2.0 * radius) * res)
                        occ[min(max(cy, 0), res - 1), min(max(cx, 0), res - 1)] += 1.0
        wins[e] = meta[M_WIN]
        ticks[e] = meta[M_TICK]
        boss_hp[e] = ch[boss, HP]
