def average_tank_trace(en):
    qual = en.getComputedQualityTimeSeries()
    column = en.getNodeIndex("1") - 1
    return float(qual.NodeQuality[:, column].mean())

result = average_tank_trace(en)
