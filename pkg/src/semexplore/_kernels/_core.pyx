# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grid kernels. Semantics mirror semexplore._kernels.pure exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt, isnan, INFINITY

cnp.import_array()

cdef int UNKNOWN = 0
cdef int FREE = 1
cdef int OCCUPIED = 2

EXIT_MAX_RANGE = 0
EXIT_HIT = 1
EXIT_OUT_OF_BOUNDS = 2


def raycast_voxels(cnp.uint8_t[:, :, ::1] states, pos, direction, double max_range_vox,
                   bint stop_at_occupied=True):
    cdef Py_ssize_t nx = states.shape[0], ny = states.shape[1], nz = states.shape[2]
    cdef double px = pos[0], py = pos[1], pz = pos[2]
    cdef double dx = direction[0], dy = direction[1], dz = direction[2]
    cdef long ix = <long>floor(px), iy = <long>floor(py), iz = <long>floor(pz)
    cdef double tmx = INFINITY, tmy = INFINITY, tmz = INFINITY
    cdef double tdx = INFINITY, tdy = INFINITY, tdz = INFINITY
    cdef long sx = 0, sy = 0, sz = 0

    if dx > 0:
        sx = 1; tmx = (floor(px) + 1.0 - px) / dx; tdx = 1.0 / dx
    elif dx < 0:
        sx = -1; tmx = (px - floor(px)) / -dx; tdx = -1.0 / dx
    if dy > 0:
        sy = 1; tmy = (floor(py) + 1.0 - py) / dy; tdy = 1.0 / dy
    elif dy < 0:
        sy = -1; tmy = (py - floor(py)) / -dy; tdy = -1.0 / dy
    if dz > 0:
        sz = 1; tmz = (floor(pz) + 1.0 - pz) / dz; tdz = 1.0 / dz
    elif dz < 0:
        sz = -1; tmz = (pz - floor(pz)) / -dz; tdz = -1.0 / dz

    cdef Py_ssize_t cap = <Py_ssize_t>(max_range_vox * 3.0) + 8
    cdef cnp.ndarray[cnp.int32_t, ndim=2] visited = np.empty((cap, 3), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] vis = visited
    cdef Py_ssize_t n = 0
    cdef bint hit = False
    cdef int exit_reason = EXIT_MAX_RANGE
    cdef int axis

    while True:
        if n >= cap:
            cap *= 2
            visited = np.resize(visited, (cap, 3))
            vis = visited
        vis[n, 0] = <cnp.int32_t>ix
        vis[n, 1] = <cnp.int32_t>iy
        vis[n, 2] = <cnp.int32_t>iz
        n += 1
        if stop_at_occupied and states[ix, iy, iz] == OCCUPIED:
            hit = True
            exit_reason = EXIT_HIT
            break
        axis = 0
        if tmy < tmx:
            axis = 1
        if axis == 0:
            if tmz < tmx:
                axis = 2
        else:
            if tmz < tmy:
                axis = 2
        if axis == 0:
            if tmx > max_range_vox:
                exit_reason = EXIT_MAX_RANGE
                break
            tmx += tdx; ix += sx
        elif axis == 1:
            if tmy > max_range_vox:
                exit_reason = EXIT_MAX_RANGE
                break
            tmy += tdy; iy += sy
        else:
            if tmz > max_range_vox:
                exit_reason = EXIT_MAX_RANGE
                break
            tmz += tdz; iz += sz
        if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
            exit_reason = EXIT_OUT_OF_BOUNDS
            break
    return visited[:n].copy(), bool(hit), exit_reason


def integrate_frame(cnp.uint8_t[:, :, ::1] states, cam_pos,
                    cnp.float64_t[:, ::1] dirs, cnp.float64_t[::1] depths_vox,
                    double max_range_vox):
    cdef Py_ssize_t nx = states.shape[0], ny = states.shape[1], nz = states.shape[2]
    cdef double cx = cam_pos[0], cy = cam_pos[1], cz = cam_pos[2]
    cdef Py_ssize_t n_pix = dirs.shape[0]

    cdef Py_ssize_t cap = n_pix * (<Py_ssize_t>(max_range_vox * 3.0) + 8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rv = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] rp = np.empty(cap, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] occ = np.empty(n_pix, dtype=np.int64)
    cdef cnp.int64_t[::1] rv_v = rv
    cdef cnp.int32_t[::1] rp_v = rp
    cdef cnp.int64_t[::1] occ_v = occ
    cdef Py_ssize_t n_rv = 0, n_occ = 0

    cdef Py_ssize_t p
    cdef double depth, limit, d_occ, d0, d1, d2
    cdef double tmx, tmy, tmz, tdx, tdy, tdz, t_exit
    cdef long ix, iy, iz, sx, sy, sz
    cdef long lin
    cdef bint occupy
    cdef int axis

    for p in range(n_pix):
        depth = depths_vox[p]
        if isnan(depth):
            continue
        occupy = depth <= max_range_vox
        limit = depth if depth < max_range_vox else max_range_vox
        # surface exactly on a voxel face must occupy the deeper cell
        d_occ = depth + 1e-6
        d0 = dirs[p, 0]; d1 = dirs[p, 1]; d2 = dirs[p, 2]
        ix = <long>floor(cx); iy = <long>floor(cy); iz = <long>floor(cz)
        sx = sy = sz = 0
        tmx = tmy = tmz = INFINITY
        tdx = tdy = tdz = INFINITY
        if d0 > 0:
            sx = 1; tmx = (floor(cx) + 1.0 - cx) / d0; tdx = 1.0 / d0
        elif d0 < 0:
            sx = -1; tmx = (cx - floor(cx)) / -d0; tdx = -1.0 / d0
        if d1 > 0:
            sy = 1; tmy = (floor(cy) + 1.0 - cy) / d1; tdy = 1.0 / d1
        elif d1 < 0:
            sy = -1; tmy = (cy - floor(cy)) / -d1; tdy = -1.0 / d1
        if d2 > 0:
            sz = 1; tmz = (floor(cz) + 1.0 - cz) / d2; tdz = 1.0 / d2
        elif d2 < 0:
            sz = -1; tmz = (cz - floor(cz)) / -d2; tdz = -1.0 / d2

        while True:
            lin = (ix * ny + iy) * nz + iz
            rv_v[n_rv] = lin
            rp_v[n_rv] = <cnp.int32_t>p
            n_rv += 1
            axis = 0
            if tmy < tmx:
                axis = 1
            if axis == 0:
                if tmz < tmx:
                    axis = 2
            else:
                if tmz < tmy:
                    axis = 2
            if axis == 0:
                t_exit = tmx
            elif axis == 1:
                t_exit = tmy
            else:
                t_exit = tmz
            if occupy and t_exit > d_occ:
                if states[ix, iy, iz] != OCCUPIED:
                    states[ix, iy, iz] = OCCUPIED
                    occ_v[n_occ] = lin
                    n_occ += 1
                break
            if states[ix, iy, iz] == UNKNOWN:
                states[ix, iy, iz] = FREE
            if t_exit > limit:
                break
            if axis == 0:
                tmx += tdx; ix += sx
            elif axis == 1:
                tmy += tdy; iy += sy
            else:
                tmz += tdz; iz += sz
            if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
                break
    return rv[:n_rv].copy(), rp[:n_rv].copy(), occ[:n_occ].copy()


def dijkstra_field(cnp.uint8_t[:, :, ::1] traversable, long src_lin, double resolution):
    cdef Py_ssize_t nx = traversable.shape[0], ny = traversable.shape[1], nz = traversable.shape[2]
    cdef Py_ssize_t total = nx * ny * nz
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist_arr = np.full(total, np.inf, dtype=np.float64)
    cdef cnp.float64_t[::1] dist = dist_arr

    cdef long sx = src_lin // (ny * nz)
    cdef long sy = (src_lin // nz) % ny
    cdef long sz = src_lin % nz
    if not traversable[sx, sy, sz]:
        return dist_arr.reshape((nx, ny, nz))
    dist[src_lin] = 0.0

    # binary min-heap of (distance, linear index)
    cdef Py_ssize_t heap_cap = total + 16
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hd_arr = np.empty(heap_cap, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] hi_arr = np.empty(heap_cap, dtype=np.int64)
    cdef cnp.float64_t[::1] hd = hd_arr
    cdef cnp.int64_t[::1] hi = hi_arr
    cdef Py_ssize_t heap_n = 0

    cdef long[26] offs
    cdef double[26] costs
    cdef int k = 0
    cdef int dx, dy, dz
    cdef long[26] ox
    cdef long[26] oy
    cdef long[26] oz
    for dx in range(-1, 2):
        for dy in range(-1, 2):
            for dz in range(-1, 2):
                if dx == 0 and dy == 0 and dz == 0:
                    continue
                ox[k] = dx; oy[k] = dy; oz[k] = dz
                offs[k] = (dx * ny + dy) * nz + dz
                costs[k] = sqrt(<double>(dx * dx + dy * dy + dz * dz)) * resolution
                k += 1

    cdef double d, nd, tmp_d
    cdef long lin, mlin, tmp_i
    cdef long cx, cy, cz, mx, my, mz
    cdef Py_ssize_t i, parent, child

    # push source
    hd[0] = 0.0; hi[0] = src_lin; heap_n = 1

    while heap_n > 0:
        d = hd[0]; lin = hi[0]
        # pop root
        heap_n -= 1
        hd[0] = hd[heap_n]; hi[0] = hi[heap_n]
        i = 0
        while True:
            child = 2 * i + 1
            if child >= heap_n:
                break
            if child + 1 < heap_n and hd[child + 1] < hd[child]:
                child += 1
            if hd[child] < hd[i]:
                tmp_d = hd[i]; hd[i] = hd[child]; hd[child] = tmp_d
                tmp_i = hi[i]; hi[i] = hi[child]; hi[child] = tmp_i
                i = child
            else:
                break
        if d > dist[lin]:
            continue
        cx = lin // (ny * nz)
        cy = (lin // nz) % ny
        cz = lin % nz
        for k in range(26):
            mx = cx + ox[k]
            if mx < 0 or mx >= nx:
                continue
            my = cy + oy[k]
            if my < 0 or my >= ny:
                continue
            mz = cz + oz[k]
            if mz < 0 or mz >= nz:
                continue
            if not traversable[mx, my, mz]:
                continue
            mlin = lin + offs[k]
            nd = d + costs[k]
            if nd < dist[mlin]:
                dist[mlin] = nd
                # push
                if heap_n >= heap_cap:
                    heap_cap *= 2
                    hd_arr = np.resize(hd_arr, heap_cap)
                    hi_arr = np.resize(hi_arr, heap_cap)
                    hd = hd_arr
                    hi = hi_arr
                i = heap_n
                hd[i] = nd; hi[i] = mlin
                heap_n += 1
                while i > 0:
                    parent = (i - 1) // 2
                    if hd[parent] > hd[i]:
                        tmp_d = hd[i]; hd[i] = hd[parent]; hd[parent] = tmp_d
                        tmp_i = hi[i]; hi[i] = hi[parent]; hi[parent] = tmp_i
                        i = parent
                    else:
                        break
    return dist_arr.reshape((nx, ny, nz))
