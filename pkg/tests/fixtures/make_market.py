"""Regenerate market_60.csv, the 60-day synthetic market used by the state tests.

Design (so flags can be checked by hand):
- trading days of 2024-01-02 .. 2024-03-27, closed on 2024-01-15 and 2024-02-19;
- the overnight gap alternates +0.2% (even rows) and -0.2% (odd rows), row 0 opens above 100;
- dollar volume is 1e9 except 3e9 on rows 30 and 45;
- high/low bracket open and close by 0.4%.
"""

import datetime as dt
from pathlib import Path

import numpy as np

HOLIDAYS = {dt.date(2024, 1, 15), dt.date(2024, 2, 19)}


def trading_days(start, count):
    days, d = [], start
    while len(days) < count:
        if d.weekday() < 5 and d not in HOLIDAYS:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def main(path=Path(__file__).with_name("market_60.csv")):
    rng = np.random.default_rng(60)
    dates = trading_days(dt.date(2024, 1, 2), 60)
    prev_close = 100.0
    lines = ["date,open,high,low,close,prev_close,dollar_volume,aux_return,holiday_prev,holiday_next"]
    for n, date in enumerate(dates):
        gap = 0.002 if n % 2 == 0 else -0.002
        open_ = round(prev_close * np.exp(gap), 4)
        close = round(open_ * np.exp(rng.normal(0, 0.01)), 4)
        high = round(max(open_, close) * 1.004, 4)
        low = round(min(open_, close) * 0.996, 4)
        volume = 3e9 if n in (30, 45) else 1e9
        aux = round(rng.normal(0, 0.012), 6)
        lines.append(f"{date.isoformat()},{open_},{high},{low},{close},{prev_close},{volume:.0f},{aux},{int(n == 0)},0")
        prev_close = close
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
