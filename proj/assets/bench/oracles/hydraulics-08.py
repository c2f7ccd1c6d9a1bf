def lowest_pressure_junction(en):
    hyd = en.getComputedHydraulicTimeSeries()
    junctions = list(en.getNodeJunctionIndex())
    lowest = min(junctions, key=lambda i: hyd.Pressure[0, i - 1])
    return en.getNodeNameID(lowest)

result = lowest_pressure_junction(en)
