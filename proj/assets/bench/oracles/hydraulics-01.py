def max_pressure(en):
    hyd = en.getComputedHydraulicTimeSeries()
    return float(hyd.Pressure.max())

result = max_pressure(en)
