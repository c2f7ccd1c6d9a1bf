def final_age_at_node(en):
    qual = en.getComputedQualityTimeSeries()
    column = en.getNodeIndex("n1") - 1
    return float(qual.NodeQuality[-1, column])

result = final_age_at_node(en)
