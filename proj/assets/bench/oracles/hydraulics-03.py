def min_pressure_at_junction(en):
    hyd = en.getComputedHydraulicTimeSeries()
    column = en.getNodeIndex("123") - 1
    return float(hyd.Pressure[:, column].min())

result = min_pressure_at_junction(en)
