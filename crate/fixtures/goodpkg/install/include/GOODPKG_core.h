/* installed copy */
