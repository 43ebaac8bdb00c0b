# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled quote kernel; semantics identical to ``_quote_py``.

Keep the arithmetic structure and accumulation order in lockstep with the
pure-Python twin — both call the same libm pow, so results match bitwise.
"""

from libc.math cimport pow


def quote_options(
    const double[:, :] cable_load,
    const double[:, :] energy_load,
    const double[:] pool_load,
    const double[:] cable_req,
    const double[:] energy_req,
    double cable_cap,
    double rate_cap,
    const double[:] pool_cap,
    const double[:] grid_price,
    double k_scale,
    double cable_low,
    double cable_high,
    double energy_low,
    double energy_high,
    double gen_low,
    double gen_high,
    double[:, ::1] out_pay,
    unsigned char[::1] out_ok,
):
    """Price one option against every EVSE at a location.

    See ``_quote_py.quote_options`` for the argument contract.
    """
    cdef Py_ssize_t evse_count = cable_load.shape[0]
    cdef Py_ssize_t width = cable_load.shape[1]
    cdef Py_ssize_t m, w
    cdef double gen_pay = 0.0
    cdef unsigned char gen_ok = 1
    cdef unsigned char ok
    cdef double cable_pay, energy_pay
    cdef double c, e, y, cap, pi

    for w in range(width):
        e = energy_req[w]
        if e > 0.0:
            cap = pool_cap[w]
            y = pool_load[w]
            if cap <= 0.0 or y + e > cap:
                gen_ok = 0
            else:
                pi = grid_price[w]
                gen_pay += e * (
                    pi
                    + ((gen_low - pi) / k_scale)
                    * pow(k_scale * (gen_high - pi) / (gen_low - pi), y / cap)
                )

    for m in range(evse_count):
        ok = gen_ok
        cable_pay = 0.0
        energy_pay = 0.0
        for w in range(width):
            c = cable_req[w]
            if c > 0.0:
                y = cable_load[m, w]
                if y + c > cable_cap:
                    ok = 0
                else:
                    cable_pay += c * (
                        (cable_low / k_scale)
                        * pow(k_scale * cable_high / cable_low, y / cable_cap)
                    )
            e = energy_req[w]
            if e > 0.0:
                y = energy_load[m, w]
                if y + e > rate_cap:
                    ok = 0
                else:
                    energy_pay += e * (
                        (energy_low / k_scale)
                        * pow(k_scale * energy_high / energy_low, y / rate_cap)
                    )
        out_pay[m, 0] = cable_pay
        out_pay[m, 1] = energy_pay
        out_pay[m, 2] = gen_pay
        out_ok[m] = ok
