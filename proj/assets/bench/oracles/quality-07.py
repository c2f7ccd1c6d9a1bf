def min_junction_chlorine(en):
    qual = en.getComputedQualityTimeSeries()
    return float(min(qual.NodeQuality[-1, i - 1] for i in en.getNodeJunctionIndex()))

result = min_junction_chlorine(en)
