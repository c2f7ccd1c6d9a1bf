def max_chlorine_at_node(en):
    qual = en.getComputedQualityTimeSeries()
    column = en.getNodeIndex("32") - 1
    return float(qual.NodeQuality[:, column].max())

result = max_chlorine_at_node(en)
