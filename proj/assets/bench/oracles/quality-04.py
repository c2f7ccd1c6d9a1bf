def final_tank_chlorine(en):
    qual = en.getComputedQualityTimeSeries()
    column = en.getNodeIndex("2") - 1
    return float(qual.NodeQuality[-1, column])

result = final_tank_chlorine(en)
