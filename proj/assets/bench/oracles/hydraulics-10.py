def low_pressure_junctions(en):
    hyd = en.getComputedHydraulicTimeSeries()
    step = list(hyd.Time).index(6 * 3600)
    return sum(1 for i in en.getNodeJunctionIndex() if hyd.Pressure[step, i - 1] < 120)

result = low_pressure_junctions(en)
