def max_trace_at_junction(en):
    qual = en.getComputedQualityTimeSeries()
    column = en.getNodeIndex("120") - 1
    return float(qual.NodeQuality[:, column].max())

result = max_trace_at_junction(en)
