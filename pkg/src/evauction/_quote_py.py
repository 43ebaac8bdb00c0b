"""Pure-Python quote kernel; semantics identical to the compiled twin.

Keep the arithmetic structure and accumulation order in lockstep with
``_quote_cy.pyx`` — both call the same libm pow, so results match bitwise.
"""

from math import pow as _pow


def quote_options(
    cable_load,
    energy_load,
    pool_load,
    cable_req,
    energy_req,
    cable_cap,
    rate_cap,
    pool_cap,
    grid_price,
    k_scale,
    cable_low,
    cable_high,
    energy_low,
    energy_high,
    gen_low,
    gen_high,
    out_pay,
    out_ok,
):
    """Price one option against every EVSE at a location.

    Array arguments are window slices: ``cable_load``/``energy_load`` are
    (evse_count, width), the rest are (width,). Writes the cable/energy/
    generation payment parts into ``out_pay`` (evse_count, 3) and a
    0/1 capacity-feasibility flag into ``out_ok``. Payment parts are only
    meaningful where the flag is 1.
    """
    evse_count = cable_load.shape[0]
    width = cable_load.shape[1]
    cables = cable_load.tolist()
    energies = energy_load.tolist()
    pool = pool_load.tolist()
    c_req = cable_req.tolist()
    e_req = energy_req.tolist()
    caps = pool_cap.tolist()
    prices = grid_price.tolist()

    gen_pay = 0.0
    gen_ok = 1
    for w in range(width):
        e = e_req[w]
        if e > 0.0:
            cap = caps[w]
            y = pool[w]
            if cap <= 0.0 or y + e > cap:
                gen_ok = 0
            else:
                pi = prices[w]
                gen_pay += e * (
                    pi
                    + ((gen_low - pi) / k_scale)
                    * _pow(k_scale * (gen_high - pi) / (gen_low - pi), y / cap)
                )

    for m in range(evse_count):
        row_c = cables[m]
        row_e = energies[m]
        ok = gen_ok
        cable_pay = 0.0
        energy_pay = 0.0
        for w in range(width):
            c = c_req[w]
            if c > 0.0:
                y = row_c[w]
                if y + c > cable_cap:
                    ok = 0
                else:
                    cable_pay += c * (
                        (cable_low / k_scale)
                        * _pow(k_scale * cable_high / cable_low, y / cable_cap)
                    )
            e = e_req[w]
            if e > 0.0:
                y = row_e[w]
                if y + e > rate_cap:
                    ok = 0
                else:
                    energy_pay += e * (
                        (energy_low / k_scale)
                        * _pow(k_scale * energy_high / energy_low, y / rate_cap)
                    )
        out_pay[m, 0] = cable_pay
        out_pay[m, 1] = energy_pay
        out_pay[m, 2] = gen_pay
        out_ok[m] = ok
