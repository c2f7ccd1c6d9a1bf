def average_chlorine_at_node(en):
    qual = en.getComputedQualityTimeSeries()
    column = en.getNodeIndex("21") - 1
    return float(qual.NodeQuality[:, column].mean())

result = average_chlorine_at_node(en)
