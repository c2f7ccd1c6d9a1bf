def average_flow(en):
    hyd = en.getComputedHydraulicTimeSeries()
    column = en.getLinkIndex("10") - 1
    return float(hyd.Flow[:, column].mean())

result = average_flow(en)
