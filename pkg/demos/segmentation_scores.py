"""
Scoring a predicted segmentation
================================
"""
import numpy as np

from recnn.metrics import confusion_matrix, seg_metrics

gt = np.array([[0, 0, 0, 0], [1, 1, 1, 1], [2, 2, 255, 255]])
pred = np.array([[0, 0, 0, 1], [1, 1, 1, 0], [2, 1, 2, 0]])

# ignore pixels (255) in the ground truth do not count
print(confusion_matrix(pred, gt))
pixel_acc, mean_acc, mean_iu = seg_metrics(pred, gt)
print(f"pixel accuracy {pixel_acc:.4f}  mean accuracy {mean_acc:.4f}  mean IU {mean_iu:.4f}")
