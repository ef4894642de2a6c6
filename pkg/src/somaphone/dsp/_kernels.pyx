# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled audio inner loops.

Same functions and argument conventions as kernels_py; see that module for
the contract. Math is written to round the same way as the NumPy fallback
(float64 intermediates, float32 stores, sequential accumulation), so the two
backends agree to float rounding. Build with -ffp-contract=off so the
compiler cannot fuse multiply-adds into differently-rounded fma ops.
"""

from libc.math cimport cos, floor, fmod, tanh

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double TWO_PI = 6.283185307179586476925286766559


cdef inline double _mod1(double x) nogil:
    # mirrors np.mod(x, 1.0) exactly, including the x -> 1.0 corner for
    # tiny negative x, so both backends walk identical phase sequences
    cdef double m = x - floor(x)
    return m


def sampler_read(cnp.float32_t[::1] src, double head,
                 double rate0, double rate1, double gain0, double gain1,
                 bint looping, cnp.float32_t[::1] out):
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t length = src.shape[0]
    cdef Py_ssize_t k, i0, i1
    cdef double acc = 0.0
    cdef double r, g, pos, fl, frac, y, ramp
    for k in range(n):
        ramp = (<double>(k + 1)) / n
        r = rate0 + (rate1 - rate0) * ramp
        g = gain0 + (gain1 - gain0) * ramp
        acc += r
        pos = head + (acc - r)
        if looping:
            # fmod, not floor-division: rounds exactly like np.mod
            pos = fmod(pos, <double>length)
            if pos < 0.0:
                pos += length
            fl = floor(pos)
            i0 = <Py_ssize_t>fl
            frac = pos - fl
            i1 = i0 + 1
            if i1 >= length:
                i1 -= length
            y = (<double>src[i0]) * (1.0 - frac) + (<double>src[i1]) * frac
        else:
            if pos >= length:
                out[k] = out[k] + <float>0.0
                continue
            fl = floor(pos)
            i0 = <Py_ssize_t>fl
            if i0 < 0:
                i0 = 0
            if i0 > length - 1:
                i0 = length - 1
            frac = pos - fl
            i1 = i0 + 1
            if i1 > length - 1:
                i1 = length - 1
            y = (<double>src[i0]) * (1.0 - frac) + (<double>src[i1]) * frac
        y = y * g
        out[k] = out[k] + <float>y
    return head + acc


def choir_voice_shift(cnp.float32_t[::1] ring, Py_ssize_t write_base,
                      double window, double phase,
                      double ratio0, double ratio1, double delay0, double delay1,
                      double gain0, double gain1, cnp.float32_t[::1] out):
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t mask = ring.shape[0] - 1
    cdef Py_ssize_t k, i0, i1
    cdef double ph_acc = 0.0
    cdef double ramp, r, d, g, ph, phb, dpos, fl, frac, ya, acc, gh, base
    cdef double new_phase = phase
    cdef int half
    for k in range(n):
        ramp = (<double>(k + 1)) / n
        r = ratio0 + (ratio1 - ratio0) * ramp
        d = delay0 + (delay1 - delay0) * ramp
        g = gain0 + (gain1 - gain0) * ramp
        ph_acc += (r - 1.0) / window
        ph = _mod1(ph_acc + phase)
        base = (<double>(k + write_base)) - d - 1.0
        acc = 0.0
        for half in range(2):
            # re-mod even for half 0: folds the ph == 1.0 corner to 0 the
            # same way the array path does
            phb = _mod1(ph + (0.5 if half else 0.0))
            dpos = (phb - 1.0) * window + base
            fl = floor(dpos)
            i0 = (<Py_ssize_t>fl) & mask
            frac = dpos - fl
            i1 = (i0 + 1) & mask
            ya = (<double>ring[i0]) * (1.0 - frac) + (<double>ring[i1]) * frac
            gh = 0.5 * (1.0 - cos(phb * TWO_PI))
            acc += ya * gh
        acc = acc * g
        out[k] = out[k] + <float>acc
    new_phase = _mod1(ph_acc + phase)
    return new_phase


def choir_voice_direct(cnp.float32_t[::1] ring, Py_ssize_t write_base,
                       double delay0, double delay1, double gain0, double gain1,
                       cnp.float32_t[::1] out):
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t mask = ring.shape[0] - 1
    cdef Py_ssize_t k, i0, i1
    cdef double ramp, d, g, pos, fl, frac, y
    for k in range(n):
        ramp = (<double>(k + 1)) / n
        d = delay0 + (delay1 - delay0) * ramp
        g = gain0 + (gain1 - gain0) * ramp
        pos = (<double>(k + write_base)) - d
        fl = floor(pos)
        i0 = (<Py_ssize_t>fl) & mask
        frac = pos - fl
        i1 = (i0 + 1) & mask
        y = (<double>ring[i0]) * (1.0 - frac) + (<double>ring[i1]) * frac
        y = y * g
        out[k] = out[k] + <float>y
    return None


def grain_segment(cnp.float32_t[::1] src, cnp.float32_t[::1] out,
                  Py_ssize_t offset, Py_ssize_t count,
                  double src_pos, double rate, long long env_idx,
                  long long glen, double amp):
    cdef Py_ssize_t n = count
    cdef Py_ssize_t length = src.shape[0]
    cdef Py_ssize_t k, i0, i1
    cdef double pos, fl, frac, y, env
    cdef double env_fac = TWO_PI / (<double>(glen - 1) if glen > 1 else 1.0)
    for k in range(n):
        pos = (<double>k) * rate + src_pos
        if pos < 0.0:
            pos = 0.0
        if pos > length - 1.0:
            pos = length - 1.0
        fl = floor(pos)
        i0 = <Py_ssize_t>fl
        frac = pos - fl
        i1 = i0 + 1
        if i1 > length - 1:
            i1 = length - 1
        y = (<double>src[i0]) * (1.0 - frac) + (<double>src[i1]) * frac
        env = 0.5 * amp * (1.0 - cos((<double>(k + env_idx)) * env_fac))
        y = y * env
        out[offset + k] = out[offset + k] + <float>y
    return src_pos + rate * n, env_idx + n


def mix_and_limit(cnp.float32_t[::1] tape, cnp.float32_t[::1] choir,
                  cnp.float32_t[::1] grain, cnp.float32_t[::1] live,
                  double master0, double master1, cnp.float32_t[::1] out):
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t k
    cdef float x, a, t, s
    cdef double ramp, m
    for k in range(n):
        ramp = (<double>(k + 1)) / n
        m = master0 + (master1 - master0) * ramp
        x = ((tape[k] + choir[k]) + grain[k]) + live[k]
        x = x * <float>m
        a = x if x >= 0 else -x
        if a > 0.5:
            t = a - <float>0.5
            t = t * <float>2.0
            t = <float>tanh(t)
            t = t * <float>0.5
            t = t + <float>0.5
            s = <float>1.0 if x > 0 else (<float>-1.0 if x < 0 else <float>0.0)
            x = s * t
        out[k] = x
    return None
