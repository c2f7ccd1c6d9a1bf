def final_tank_head(en):
    hyd = en.getComputedHydraulicTimeSeries()
    column = en.getNodeIndex("2") - 1
    return float(hyd.Head[-1, column])

result = final_tank_head(en)
