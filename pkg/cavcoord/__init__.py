#! /usr/bin/env python

__all__=['errors','geomlib','trajlib','safetylib','seqlib','scenario','simlib','travel_stats','cav_coord']
