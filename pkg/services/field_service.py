"""
Field Service module
Header echo, statistics and CSV export of CIGRID files
"""

import logging
import os

import numpy as np
import pandas as pd

from db.cigrid import read_field, read_header

logger = logging.getLogger('corrugate.services.field')


class FieldService:
    """
    Service for inspecting field files
    """
    def info(self, path):
        """
        Header and file size

        Returns:
            dict: Header fields plus 'path' and 'bytes'
        """
        header = read_header(path)
        out = header.to_dict()
        out.update({'path': path, 'bytes': os.path.getsize(path)})
        return out

    def component_table(self, data):
        """Per-component statistics as a DataFrame"""
        values = data.values if data.header.kind != 'scalar' else data.values[None]
        rows = []
        for k, comp in enumerate(values):
            rows.append({
                'component': k,
                'min': float(np.min(comp)),
                'max': float(np.max(comp)),
                'mean': float(np.mean(comp)),
                'sup': float(np.max(np.abs(comp))),
            })
        return pd.DataFrame(rows)

    def dump(self, path, csv_path=None):
        """
        Header, overall statistics and per-component table

        Args:
            path (str): CIGRID file
            csv_path (str, optional): Also export node coordinates and values as CSV

        Returns:
            dict: 'header', 'stats' and 'components' (DataFrame)
        """
        data = read_field(path)
        table = self.component_table(data)
        if csv_path:
            self.export_csv(data, csv_path)
        return {'header': data.header.to_dict(), 'stats': data.stats(), 'components': table}

    def export_csv(self, data, csv_path):
        header = data.header
        lo = np.asarray(header.bbox[0::2])
        axes = [lo[k] + header.h * np.arange(header.shape[k]) for k in range(header.n)]
        mesh = np.meshgrid(*axes, indexing='ij')
        frame = pd.DataFrame({f"x{k}": m.ravel() for k, m in enumerate(mesh)})
        values = data.values if header.kind != 'scalar' else data.values[None]
        for k, comp in enumerate(values):
            frame[f"c{k}"] = comp.ravel()
        frame.to_csv(csv_path, index=False)
        logger.info(f"Exported {len(frame)} nodes to {csv_path}")
