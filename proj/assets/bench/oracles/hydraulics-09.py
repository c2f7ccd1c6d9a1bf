def min_tank_head(en):
    hyd = en.getComputedHydraulicTimeSeries()
    column = en.getNodeIndex("T1") - 1
    return float(hyd.Head[:, column].min())

result = min_tank_head(en)
